#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "refcolor/engine/tensor.hpp"

namespace refcolor {

// A learnable tensor with a unique path name. Parameters carrying spectral
// normalization keep a persistent power-iteration vector.
struct Parameter {
    Tensor tensor;       // requires_grad = true
    std::string name;
    Tensor spectral_u;   // [out_dim], undefined unless spectrally normalized
    bool spectral = false;
};

// Owns parameters in registration order; names must be unique. Pointer
// stability is guaranteed (deque storage), so layers can keep Parameter*.
class ParamStore {
  public:
    Parameter& add(const std::string& name, Tensor t, bool spectral = false, Rng* rng = nullptr);
    Parameter* find(const std::string& name);
    const Parameter* find(const std::string& name) const;
    std::vector<Parameter*> all();
    std::vector<const Parameter*> all() const;
    std::size_t size() const { return params_.size(); }

    void zero_grad();
    void set_requires_grad(bool v);

  private:
    std::deque<Parameter> params_;
    std::unordered_map<std::string, Parameter*> by_name_;
};

// Applies spectral normalization to a parameter viewed as a 2-D matrix
// (first extent x rest): returns W / sigma_hat with sigma_hat from power
// iteration. `iters` power iterations refine the persistent state when state
// updates are enabled; with iters == 0 the stored vector is used as-is.
Tensor spectral_normalize(Parameter& p, int iters = 1);

// Scoped switch disabling persistent power-iteration state updates (used by
// finite-difference checks, which require a frozen forward map).
struct SpectralStateFreezeGuard {
    SpectralStateFreezeGuard();
    ~SpectralStateFreezeGuard();
    SpectralStateFreezeGuard(const SpectralStateFreezeGuard&) = delete;
    SpectralStateFreezeGuard& operator=(const SpectralStateFreezeGuard&) = delete;

  private:
    bool prev_;
};
bool spectral_state_updates_enabled();

} // namespace refcolor
