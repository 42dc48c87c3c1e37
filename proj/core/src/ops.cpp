#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "aigflow/error.hpp"
#include "aigflow/tensor.hpp"

namespace aigflow::ops {
namespace {

using detail::make_result;
using detail::Node;
using Grads = std::span<std::vector<double>*>;

void expect(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, what);
}

constexpr double kBceLo = 1e-7;
constexpr double kBceHi = 1.0 - 1e-7;

std::string shape(const Tensor& t) { return std::to_string(t.rows()) + "x" + std::to_string(t.cols()); }

const std::vector<double>& pv(const Node& self, std::size_t i) { return self.parents[i]->values; }

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  expect(a.cols() == b.rows(), "matmul: " + shape(a) + " * " + shape(b));
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += x * bv[p * m + j];
    }
  return make_result(n, m, std::move(out), {a, b}, [n, k, m](const Node& self, std::span<const double> g, Grads pg) {
    const auto& av = pv(self, 0);
    const auto& bv = pv(self, 1);
    if (pg[0]) {
      auto& ga = *pg[0];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * bv[p * m + j];
          ga[i * k + p] += s;
        }
    }
    if (pg[1]) {
      auto& gb = *pg[1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = av[i * k + p];
          if (x == 0.0) continue;
          for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += x * g[i * m + j];
        }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  expect(broadcast || (a.rows() == b.rows() && a.cols() == b.cols()), "add: " + shape(a) + " + " + shape(b));
  const std::size_t n = a.rows(), c = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += broadcast ? bv[j] : bv[i * c + j];
  return make_result(n, c, std::move(out), {a, b}, [n, c, broadcast](const Node&, std::span<const double> g, Grads pg) {
    if (pg[0])
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    if (pg[1]) {
      auto& gb = *pg[1];
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[broadcast ? j : i * c + j] += g[i * c + j];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect(a.rows() == b.rows() && a.cols() == b.cols(), "sub: " + shape(a) + " - " + shape(b));
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [](const Node&, std::span<const double> g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (pg[0]) (*pg[0])[i] += g[i];
      if (pg[1]) (*pg[1])[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect(a.rows() == b.rows() && a.cols() == b.cols(), "mul: " + shape(a) + " * " + shape(b));
  std::vector<double> out(a.numel());
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_result(a.rows(), a.cols(), std::move(out), {a, b},
                     [](const Node& self, std::span<const double> g, Grads pg) {
                       const auto& av = pv(self, 0);
                       const auto& bv = pv(self, 1);
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (pg[0]) (*pg[0])[i] += g[i] * bv[i];
                         if (pg[1]) (*pg[1])[i] += g[i] * av[i];
                       }
                     });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& x : out) x *= s;
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [s](const Node&, std::span<const double> g, Grads pg) {
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += s * g[i];
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  expect(!parts.empty(), "concat_cols: no inputs");
  const std::size_t n = parts[0].rows();
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : parts) {
    expect(p.rows() == n, "concat_cols: row mismatch " + shape(parts[0]) + " vs " + shape(p));
    offsets.push_back(total);
    total += p.cols();
  }
  std::vector<double> out(n * total);
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const auto v = parts[t].values();
    const std::size_t c = parts[t].cols();
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(v.begin() + i * c, c, out.begin() + i * total + offsets[t]);
  }
  return make_result(n, total, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [n, total, offsets](const Node& self, std::span<const double> g, Grads pg) {
                       for (std::size_t t = 0; t < pg.size(); ++t) {
                         if (!pg[t]) continue;
                         const std::size_t c = self.parents[t]->cols;
                         for (std::size_t i = 0; i < n; ++i)
                           for (std::size_t j = 0; j < c; ++j) (*pg[t])[i * c + j] += g[i * total + offsets[t] + j];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  expect(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts[0].cols();
  std::vector<double> out;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    expect(p.cols() == c, "concat_rows: column mismatch " + shape(parts[0]) + " vs " + shape(p));
    out.insert(out.end(), p.values().begin(), p.values().end());
    rows += p.rows();
  }
  return make_result(rows, c, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                     [](const Node& self, std::span<const double> g, Grads pg) {
                       std::size_t offset = 0;
                       for (std::size_t t = 0; t < pg.size(); ++t) {
                         const std::size_t len = self.parents[t]->values.size();
                         if (pg[t])
                           for (std::size_t i = 0; i < len; ++i) (*pg[t])[i] += g[offset + i];
                         offset += len;
                       }
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::uint32_t> index) {
  const std::size_t c = a.cols();
  std::vector<double> out(index.size() * c);
  const auto av = a.values();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows())
      throw Error(ErrorCode::kOutOfRange, "gather_rows: index " + std::to_string(index[i]) + " >= " +
                                              std::to_string(a.rows()));
    std::copy_n(av.begin() + index[i] * c, c, out.begin() + i * c);
  }
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return make_result(index.size(), c, std::move(out), {a},
                     [c, idx = std::move(idx)](const Node&, std::span<const double> g, Grads pg) {
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < idx.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[idx[i] * c + j] += g[i * c + j];
                     });
}

Tensor segment_sum(const Tensor& a, std::span<const std::uint32_t> segment, std::size_t num_segments) {
  expect(segment.size() == a.rows(), "segment_sum: segment ids do not match rows of " + shape(a));
  const std::size_t c = a.cols();
  std::vector<double> out(num_segments * c, 0.0);
  const auto av = a.values();
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= num_segments) throw Error(ErrorCode::kOutOfRange, "segment_sum: segment id out of range");
    for (std::size_t j = 0; j < c; ++j) out[segment[i] * c + j] += av[i * c + j];
  }
  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return make_result(num_segments, c, std::move(out), {a},
                     [c, seg = std::move(seg)](const Node&, std::span<const double> g, Grads pg) {
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[seg[i] * c + j];
                     });
}

Tensor segment_softmax(const Tensor& a, std::span<const std::uint32_t> segment, std::size_t num_segments) {
  expect(segment.size() == a.rows(), "segment_softmax: segment ids do not match rows of " + shape(a));
  const std::size_t c = a.cols();
  const auto av = a.values();
  std::vector<double> mx(num_segments * c, -INFINITY);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (segment[i] >= num_segments) throw Error(ErrorCode::kOutOfRange, "segment_softmax: segment id out of range");
    for (std::size_t j = 0; j < c; ++j) mx[segment[i] * c + j] = std::max(mx[segment[i] * c + j], av[i * c + j]);
  }
  std::vector<double> out(a.numel());
  std::vector<double> denom(num_segments * c, 0.0);
  for (std::size_t i = 0; i < segment.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = std::exp(av[i * c + j] - mx[segment[i] * c + j]);
      denom[segment[i] * c + j] += out[i * c + j];
    }
  for (std::size_t i = 0; i < segment.size(); ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom[segment[i] * c + j];

  std::vector<std::uint32_t> seg(segment.begin(), segment.end());
  return make_result(a.rows(), c, std::move(out), {a},
                     [c, num_segments, seg = std::move(seg)](const Node& self, std::span<const double> g, Grads pg) {
                       // dx_i = y_i * (g_i - sum_{j in seg} g_j y_j)
                       const auto& y = self.values;
                       std::vector<double> dot(num_segments * c, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j) dot[seg[i] * c + j] += g[i * c + j] * y[i * c + j];
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < seg.size(); ++i)
                         for (std::size_t j = 0; j < c; ++j)
                           ga[i * c + j] += y[i * c + j] * (g[i * c + j] - dot[seg[i] * c + j]);
                     });
}

Tensor relu(const Tensor& a) { return leaky_relu(a, 0.0); }

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.values().begin(), a.values().end());
  double margin = std::numeric_limits<double>::infinity();
  for (auto& x : out) {
    margin = std::min(margin, std::abs(x));
    if (x < 0.0) x *= slope;
  }
  detail::note_kink_distance(margin);
  return make_result(a.rows(), a.cols(), std::move(out), {a},
                     [slope](const Node& self, std::span<const double> g, Grads pg) {
                       const auto& x = pv(self, 0);
                       for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += x[i] < 0.0 ? slope * g[i] : g[i];
                     });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = av[i];
    out[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [](const Node& self, std::span<const double> g, Grads pg) {
    const auto& y = self.values;
    for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor softplus(const Tensor& a) {
  std::vector<double> out(a.numel());
  const auto av = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(av[i], 0.0) + std::log1p(std::exp(-std::abs(av[i])));
  return make_result(a.rows(), a.cols(), std::move(out), {a}, [](const Node& self, std::span<const double> g, Grads pg) {
    const auto& x = pv(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double s = x[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      (*pg[0])[i] += g[i] * s;
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  const std::size_t n = a.rows(), c = a.cols();
  expect(c > 0, "layer_norm: zero columns");
  const auto av = a.values();
  std::vector<double> out(n * c), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += av[i * c + j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (av[i * c + j] - mu) * (av[i * c + j] - mu);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (av[i * c + j] - mu) * inv_std[i];
  }
  return make_result(n, c, std::move(out), {a},
                     [n, c, inv_std = std::move(inv_std)](const Node& self, std::span<const double> g, Grads pg) {
                       const auto& y = self.values;
                       auto& ga = *pg[0];
                       for (std::size_t i = 0; i < n; ++i) {
                         double gm = 0.0, gy = 0.0;
                         for (std::size_t j = 0; j < c; ++j) {
                           gm += g[i * c + j];
                           gy += g[i * c + j] * y[i * c + j];
                         }
                         gm /= static_cast<double>(c);
                         gy /= static_cast<double>(c);
                         for (std::size_t j = 0; j < c; ++j)
                           ga[i * c + j] += inv_std[i] * (g[i * c + j] - gm - y[i * c + j] * gy);
                       }
                     });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.values()) s += x;
  return make_result(1, 1, {s}, {a}, [](const Node&, std::span<const double> g, Grads pg) {
    for (auto& x : *pg[0]) x += g[0];
  });
}

Tensor mean(const Tensor& a) {
  expect(a.numel() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor l1_loss(const Tensor& pred, const Tensor& target) {
  expect(pred.rows() == target.rows() && pred.cols() == target.cols(),
         "l1_loss: " + shape(pred) + " vs " + shape(target));
  expect(pred.numel() > 0, "l1_loss: empty input");
  const auto p = pred.values();
  const auto t = target.values();
  double s = 0.0, margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += std::abs(p[i] - t[i]);
    margin = std::min(margin, std::abs(p[i] - t[i]));
  }
  detail::note_kink_distance(margin);
  const double inv = 1.0 / static_cast<double>(p.size());
  return make_result(1, 1, {s * inv}, {pred, target}, [inv](const Node& self, std::span<const double> g, Grads pg) {
    const auto& p = pv(self, 0);
    const auto& t = pv(self, 1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p[i] - t[i];
      const double sg = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      if (pg[0]) (*pg[0])[i] += g[0] * inv * sg;
      if (pg[1]) (*pg[1])[i] -= g[0] * inv * sg;
    }
  });
}

Tensor bce_loss(const Tensor& pred, const Tensor& target) {
  expect(pred.rows() == target.rows() && pred.cols() == target.cols(),
         "bce_loss: " + shape(pred) + " vs " + shape(target));
  expect(pred.numel() > 0, "bce_loss: empty input");
  const auto p = pred.values();
  const auto t = target.values();
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0) || !(t[i] >= 0.0 && t[i] <= 1.0))
      throw Error(ErrorCode::kInvalidArgument, "bce_loss: input outside [0, 1]");
    const double q = std::clamp(p[i], kBceLo, kBceHi);
    s -= t[i] * std::log(q) + (1.0 - t[i]) * std::log(1.0 - q);
  }
  const double inv = 1.0 / static_cast<double>(p.size());
  return make_result(1, 1, {s * inv}, {pred, target}, [inv](const Node& self, std::span<const double> g, Grads pg) {
    const auto& p = pv(self, 0);
    const auto& t = pv(self, 1);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool clamped = p[i] < kBceLo || p[i] > kBceHi;
      const double q = std::clamp(p[i], kBceLo, kBceHi);
      if (pg[0] && !clamped) (*pg[0])[i] += g[0] * inv * (q - t[i]) / (q * (1.0 - q));
      if (pg[1]) (*pg[1])[i] -= g[0] * inv * (std::log(q) - std::log(1.0 - q));
    }
  });
}

Tensor head_dot(const Tensor& q, const Tensor& k, std::size_t heads) {
  expect(q.rows() == k.rows() && q.cols() == k.cols(), "head_dot: " + shape(q) + " vs " + shape(k));
  expect(heads > 0 && q.cols() % heads == 0, "head_dot: width not divisible by heads");
  const std::size_t e = q.rows(), d = q.cols(), dh = d / heads;
  const auto qv = q.values();
  const auto kv = k.values();
  std::vector<double> out(e * heads, 0.0);
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * heads + c / dh] += qv[i * d + c] * kv[i * d + c];
  return make_result(e, heads, std::move(out), {q, k},
                     [e, d, dh, heads](const Node& self, std::span<const double> g, Grads pg) {
                       const auto& qv = pv(self, 0);
                       const auto& kv = pv(self, 1);
                       for (std::size_t i = 0; i < e; ++i)
                         for (std::size_t c = 0; c < d; ++c) {
                           const double gh = g[i * heads + c / dh];
                           if (pg[0]) (*pg[0])[i * d + c] += gh * kv[i * d + c];
                           if (pg[1]) (*pg[1])[i * d + c] += gh * qv[i * d + c];
                         }
                     });
}

Tensor head_scale(const Tensor& alpha, const Tensor& v) {
  expect(alpha.rows() == v.rows(), "head_scale: " + shape(alpha) + " vs " + shape(v));
  const std::size_t heads = alpha.cols();
  expect(heads > 0 && v.cols() % heads == 0, "head_scale: width not divisible by heads");
  const std::size_t e = v.rows(), d = v.cols(), dh = d / heads;
  const auto av = alpha.values();
  const auto vv = v.values();
  std::vector<double> out(e * d);
  for (std::size_t i = 0; i < e; ++i)
    for (std::size_t c = 0; c < d; ++c) out[i * d + c] = av[i * heads + c / dh] * vv[i * d + c];
  return make_result(e, d, std::move(out), {alpha, v},
                     [e, d, dh, heads](const Node& self, std::span<const double> g, Grads pg) {
                       const auto& av = pv(self, 0);
                       const auto& vv = pv(self, 1);
                       for (std::size_t i = 0; i < e; ++i)
                         for (std::size_t c = 0; c < d; ++c) {
                           if (pg[0]) (*pg[0])[i * heads + c / dh] += g[i * d + c] * vv[i * d + c];
                           if (pg[1]) (*pg[1])[i * d + c] += g[i * d + c] * av[i * heads + c / dh];
                         }
                     });
}

}  // namespace aigflow::ops
