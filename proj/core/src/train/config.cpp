#include <fstream>
#include <sstream>
#include <stdexcept>

#include "refcolor/train/config.hpp"

namespace refcolor::train {

namespace {

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void TrainConfig::validate() const {
    if (lr_g <= 0 || lr_d <= 0) throw std::invalid_argument("config: learning rates must be positive");
    if (batch < 1) throw std::invalid_argument("config: batch must be >= 1");
    if (image_size < 32 || image_size % 16 != 0)
        throw std::invalid_argument("config: image_size must be >= 32 and divisible by 16");
    if (precision != "f32" && precision != "f64")
        throw std::invalid_argument("config: precision must be f32 or f64");
    if (weights.perc < 0 || weights.style < 0 || weights.latent < 0 || weights.gan < 0 || weights.l1 < 0)
        throw std::invalid_argument("config: loss weights must be non-negative");
}

std::string TrainConfig::serialize() const {
    std::ostringstream os;
    os << "lr_g=" << fmt_double(lr_g) << "\n";
    os << "lr_d=" << fmt_double(lr_d) << "\n";
    os << "beta1=" << fmt_double(beta1) << "\n";
    os << "beta2=" << fmt_double(beta2) << "\n";
    os << "batch=" << batch << "\n";
    os << "epochs_color=" << epochs_color << "\n";
    os << "epochs_temporal=" << epochs_temporal << "\n";
    os << "epochs_finetune=" << epochs_finetune << "\n";
    os << "steps_color=" << steps_color << "\n";
    os << "steps_temporal=" << steps_temporal << "\n";
    os << "steps_finetune=" << steps_finetune << "\n";
    os << "seed=" << seed << "\n";
    os << "image_size=" << image_size << "\n";
    os << "precision=" << precision << "\n";
    os << "lambda_perc=" << fmt_double(weights.perc) << "\n";
    os << "lambda_style=" << fmt_double(weights.style) << "\n";
    os << "lambda_latent=" << fmt_double(weights.latent) << "\n";
    os << "lambda_gan=" << fmt_double(weights.gan) << "\n";
    os << "lambda_l1=" << fmt_double(weights.l1) << "\n";
    os << "gram_normalize=" << (gram_normalize ? 1 : 0) << "\n";
    os << "finetune_temporal=" << (finetune_temporal ? 1 : 0) << "\n";
    os << "grad_clip=" << fmt_double(grad_clip) << "\n";
    os << "enc_channels=" << join_ints(enc_channels) << "\n";
    os << "embed_channels=" << join_ints(embed_channels) << "\n";
    os << "disc_channels=" << join_ints(disc_channels) << "\n";
    os << "temporal_enc_channels=" << join_ints(temporal_enc_channels) << "\n";
    os << "temporal_dec_channels=" << join_ints(temporal_dec_channels) << "\n";
    os << "temporal_disc_channels=" << join_ints(temporal_disc_channels) << "\n";
    os << "pyramid_channels=" << join_ints(pyramid_channels) << "\n";
    os << "pyramid_weights=" << pyramid_weights << "\n";
    os << "shot_cut_threshold=" << fmt_double(shot_cut_threshold) << "\n";
    os << "shot_uniform_threshold=" << fmt_double(shot_uniform_threshold) << "\n";
    os << "shot_min_length=" << shot_min_length << "\n";
    os << "shot_min_luminance=" << fmt_double(shot_min_luminance) << "\n";
    os << "shot_min_channel_std=" << fmt_double(shot_min_channel_std) << "\n";
    os << "histogram_normalize=" << (histogram_normalize ? 1 : 0) << "\n";
    os << "dataset=" << dataset << "\n";
    return os.str();
}

void TrainConfig::apply_override(const std::string& key, const std::string& value) {
    if (key == "lr_g") lr_g = std::stod(value);
    else if (key == "lr_d") lr_d = std::stod(value);
    else if (key == "beta1") beta1 = std::stod(value);
    else if (key == "beta2") beta2 = std::stod(value);
    else if (key == "batch") batch = std::stoi(value);
    else if (key == "epochs_color") epochs_color = std::stoi(value);
    else if (key == "epochs_temporal") epochs_temporal = std::stoi(value);
    else if (key == "epochs_finetune") epochs_finetune = std::stoi(value);
    else if (key == "steps_color") steps_color = std::stoi(value);
    else if (key == "steps_temporal") steps_temporal = std::stoi(value);
    else if (key == "steps_finetune") steps_finetune = std::stoi(value);
    else if (key == "seed") seed = std::stoull(value);
    else if (key == "image_size") image_size = std::stoi(value);
    else if (key == "precision") precision = value;
    else if (key == "lambda_perc") weights.perc = std::stod(value);
    else if (key == "lambda_style") weights.style = std::stod(value);
    else if (key == "lambda_latent") weights.latent = std::stod(value);
    else if (key == "lambda_gan") weights.gan = std::stod(value);
    else if (key == "lambda_l1") weights.l1 = std::stod(value);
    else if (key == "gram_normalize") gram_normalize = std::stoi(value) != 0;
    else if (key == "finetune_temporal") finetune_temporal = std::stoi(value) != 0;
    else if (key == "grad_clip") grad_clip = std::stod(value);
    else if (key == "enc_channels") enc_channels = parse_ints(value);
    else if (key == "embed_channels") embed_channels = parse_ints(value);
    else if (key == "disc_channels") disc_channels = parse_ints(value);
    else if (key == "temporal_enc_channels") temporal_enc_channels = parse_ints(value);
    else if (key == "temporal_dec_channels") temporal_dec_channels = parse_ints(value);
    else if (key == "temporal_disc_channels") temporal_disc_channels = parse_ints(value);
    else if (key == "pyramid_channels") pyramid_channels = parse_ints(value);
    else if (key == "pyramid_weights") pyramid_weights = value;
    else if (key == "shot_cut_threshold") shot_cut_threshold = std::stod(value);
    else if (key == "shot_uniform_threshold") shot_uniform_threshold = std::stod(value);
    else if (key == "shot_min_length") shot_min_length = std::stoi(value);
    else if (key == "shot_min_luminance") shot_min_luminance = std::stod(value);
    else if (key == "shot_min_channel_std") shot_min_channel_std = std::stod(value);
    else if (key == "histogram_normalize") histogram_normalize = std::stoi(value) != 0;
    else if (key == "dataset") dataset = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

TrainConfig TrainConfig::parse(const std::string& text) {
    TrainConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: malformed line '" + line + "'");
        cfg.apply_override(line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

TrainConfig TrainConfig::load_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return parse(os.str());
}

} // namespace refcolor::train
