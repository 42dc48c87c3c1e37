#include "aigflow/ged.hpp"

#include <algorithm>
#include <array>

namespace aigflow {

LabeledGraph cone_graph(const Aig& aig, const Cone& cone) {
  LabeledGraph g;
  for (NodeId m : cone.members) g.labels.push_back(aig.type(m));
  for (const auto& e : cone.local_edges)
    g.edges.emplace_back(static_cast<std::uint32_t>(*cone.local_index(e.src)),
                         static_cast<std::uint32_t>(*cone.local_index(e.dst)));
  return g;
}

namespace {

constexpr std::size_t kMaxNodes = 32;
constexpr std::size_t kEps = kMaxNodes;  // "deleted" image

class GedSearch {
 public:
  GedSearch(const LabeledGraph& a, const LabeledGraph& b) : a_(a), b_(b), n1_(a.labels.size()), n2_(b.labels.size()) {
    adj1_.assign(n1_ * n1_, 0);
    adj2_.assign(n2_ * n2_, 0);
    for (auto [s, d] : a.edges) adj1_[s * n1_ + d] = 1;
    for (auto [s, d] : b.edges) adj2_[s * n2_ + d] = 1;
    deg1_.assign(n1_, 0);
    for (auto [s, d] : a.edges) ++deg1_[s], ++deg1_[d];

    order_.resize(n1_);
    for (std::size_t i = 0; i < n1_; ++i) order_[i] = i;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t x, std::size_t y) { return deg1_[x] > deg1_[y]; });
    position_.assign(n1_, 0);
    for (std::size_t t = 0; t < n1_; ++t) position_[order_[t]] = t;
    image_.assign(n1_, kEps);
    used_.assign(n2_, false);
    best_ = n1_ + n2_ + a.edges.size() + b.edges.size();
  }

  std::size_t run() {
    dfs(0, 0);
    return best_;
  }

 private:
  std::size_t label_index(GateType t) const { return static_cast<std::size_t>(t); }

  std::size_t lower_bound(std::size_t t) const {
    std::array<std::size_t, 3> c1{}, c2{};
    for (std::size_t s = t; s < n1_; ++s) ++c1[label_index(a_.labels[order_[s]])];
    std::size_t r2 = 0;
    for (std::size_t x = 0; x < n2_; ++x)
      if (!used_[x]) ++c2[label_index(b_.labels[x])], ++r2;
    std::size_t common = 0;
    for (std::size_t l = 0; l < 3; ++l) common += std::min(c1[l], c2[l]);
    const std::size_t node_lb = std::max(n1_ - t, r2) - common;

    std::size_t e1 = 0, e2 = 0;
    for (auto [s, d] : a_.edges)
      if (position_[s] >= t || position_[d] >= t) ++e1;
    for (auto [s, d] : b_.edges)
      if (!used_[s] || !used_[d]) ++e2;
    return node_lb + (e1 > e2 ? e1 - e2 : e2 - e1);
  }

  // Cost of mapping order_[t] -> x given the images of order_[0..t).
  std::size_t step_cost(std::size_t t, std::size_t x) const {
    const std::size_t u = order_[t];
    std::size_t cost = (x == kEps) ? 1 : (a_.labels[u] != b_.labels[x] ? 1 : 0);
    for (std::size_t s = 0; s < t; ++s) {
      const std::size_t v = order_[s];
      const std::size_t y = image_[v];
      const int uv = adj1_[u * n1_ + v], vu = adj1_[v * n1_ + u];
      if (x == kEps || y == kEps) {
        cost += static_cast<std::size_t>(uv + vu);
      } else {
        cost += (uv != adj2_[x * n2_ + y]) + (vu != adj2_[y * n2_ + x]);
      }
    }
    return cost;
  }

  std::size_t completion_cost() const {
    std::size_t cost = 0;
    for (std::size_t x = 0; x < n2_; ++x) cost += used_[x] ? 0 : 1;
    for (auto [s, d] : b_.edges)
      if (!used_[s] || !used_[d]) ++cost;
    return cost;
  }

  void dfs(std::size_t t, std::size_t g) {
    if (g + lower_bound(t) >= best_) return;
    if (t == n1_) {
      best_ = std::min(best_, g + completion_cost());
      return;
    }
    struct Option {
      std::size_t cost;
      std::size_t image;
    };
    std::vector<Option> options;
    for (std::size_t x = 0; x < n2_; ++x)
      if (!used_[x]) options.push_back({step_cost(t, x), x});
    options.push_back({step_cost(t, kEps), kEps});
    std::stable_sort(options.begin(), options.end(), [](const Option& p, const Option& q) { return p.cost < q.cost; });

    const std::size_t u = order_[t];
    for (const auto& opt : options) {
      if (g + opt.cost >= best_) continue;
      image_[u] = opt.image;
      if (opt.image != kEps) used_[opt.image] = true;
      dfs(t + 1, g + opt.cost);
      if (opt.image != kEps) used_[opt.image] = false;
      image_[u] = kEps;
    }
  }

  const LabeledGraph& a_;
  const LabeledGraph& b_;
  std::size_t n1_, n2_;
  std::vector<int> adj1_, adj2_;
  std::vector<std::size_t> deg1_, order_, position_, image_;
  std::vector<bool> used_;
  std::size_t best_;
};

}  // namespace

std::optional<std::size_t> ged(const LabeledGraph& a, const LabeledGraph& b, std::size_t node_limit) {
  if (a.labels.size() > node_limit || b.labels.size() > node_limit) return std::nullopt;
  if (a.labels.size() > kMaxNodes || b.labels.size() > kMaxNodes) return std::nullopt;
  return GedSearch(a, b).run();
}

}  // namespace aigflow
