#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace refcolor {

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType dt) { return dt == DType::F32 ? 4 : 8; }

inline const char* dtype_name(DType dt) { return dt == DType::F32 ? "f32" : "f64"; }

inline DType dtype_from_name(const std::string& s) {
    if (s == "f32" || s == "float32" || s == "float") return DType::F32;
    if (s == "f64" || s == "float64" || s == "double") return DType::F64;
    throw std::invalid_argument("unknown dtype: " + s);
}

// Calls f with a value of the dtype's element type; f must be a generic callable.
template <class F>
decltype(auto) dispatch_dtype(DType dt, F&& f) {
    if (dt == DType::F32) return f(float{});
    return f(double{});
}

} // namespace refcolor
