#ifndef KWS_TENSOR_HPP
#define KWS_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace kws {

// Dense rank-3 array, row-major with time outermost: index = (t*F + f)*C + c.
template <typename S>
struct Tensor3T {
  int t = 0;  // time
  int f = 0;  // frequency
  int c = 0;  // channels
  std::vector<S> data;

  Tensor3T() = default;
  Tensor3T(int t_, int f_, int c_) : t(t_), f(f_), c(c_) {
    if (t < 1 || f < 1 || c < 1) {
      throw std::invalid_argument("Tensor3 dims must all be >= 1");
    }
    data.assign(static_cast<std::size_t>(t) * f * c, S(0));
  }

  std::size_t size() const { return data.size(); }

  S& at(int ti, int fi, int ci) {
    return data[(static_cast<std::size_t>(ti) * f + fi) * c + ci];
  }
  const S& at(int ti, int fi, int ci) const {
    return data[(static_cast<std::size_t>(ti) * f + fi) * c + ci];
  }

  bool same_shape(const Tensor3T& o) const {
    return t == o.t && f == o.f && c == o.c;
  }
};

using Tensor3 = Tensor3T<float>;
using Tensor3d = Tensor3T<double>;

}  // namespace kws

#endif
