// Exact gradient row of the attack objectives on a 4-hop region around the target.
//
// At the evaluation point every entry outside the region is fixed: inner mask
// steps only move entries incident to the 2-hop ball, so entries touching
// nodes 4 hops out keep their initial value. Edges from region nodes to the
// outside therefore enter as constant degree and first-layer offsets. A node j
// at distance 5 or more only reaches the loss through the relaxed entry
// (v, j), which is zero; its first-order effect is linear in three quantities
// injected at v (degree, first-layer input, second-layer output), once for the
// plain forward and once for the masked forward.

#include <cmath>
#include <stdexcept>

#include "geattack/attack/attack.hpp"
#include "geattack/autodiff/ops.hpp"

namespace geattack::attack {

namespace {

using ad::DiffValue;
using ad::Tape;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Channels {
  DiffValue degree;  // 1 x 1
  DiffValue output;  // 1 x C
  DiffValue input;   // 1 x h
};

Channels channel_variables(Tape& t, std::size_t h, std::size_t c) {
  return {t.variable(DenseMatrix(1, 1)), t.variable(DenseMatrix(1, c)), t.variable(DenseMatrix(1, h))};
}

/// Probabilities at local row lv for weighted local adjacency w, with outside
/// edges folded into the offsets and far nodes into the channels.
DiffValue local_probs(const gcn::GcnModel& model, const DiffValue& w, const DiffValue& xw1,
                      const DiffValue& degree_offset, const DiffValue& input_offset, const Channels& ch,
                      std::size_t lv) {
  const std::size_t s = w.rows();
  const std::size_t h = model.hidden_dim();
  const std::size_t c = model.num_classes();
  Tape& t = w.tape();
  DiffValue deg = ad::add(ad::add(ad::row_sum(w), degree_offset), ad::place(ch.degree, s, 1, lv, 0));
  DiffValue dinv = ad::pow(ad::add_scalar(deg, 1.0), -0.5);
  DiffValue an = ad::diag_scale(ad::add_identity(w), dinv);
  DiffValue dv = ad::pick(dinv, lv, 0);
  DiffValue pre = ad::add(ad::add(ad::matmul(an, xw1), input_offset),
                          ad::place_row(ad::mul(ch.input, ad::fill(dv, 1, h)), s, lv));
  DiffValue z = ad::matmul(ad::relu(pre), t.constant(model.w2));
  DiffValue out = ad::add(ad::matmul(ad::select_row(an, lv), z), ad::mul(ch.output, ad::fill(dv, 1, c)));
  return ad::softmax_rows(out);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

/// Per-node degree and second-layer output under edge weights `weight(i, k)`.
struct FarForward {
  std::vector<double> degree;  // 1 + weighted degree
  DenseMatrix z;               // rows filled only where requested
};

template <class Weight>
FarForward far_forward(const gcn::GcnModel& model, const std::vector<std::vector<std::size_t>>& nbrs,
                       const DenseMatrix& xw1, const std::vector<char>& want, Weight weight) {
  const std::size_t n = nbrs.size();
  const std::size_t h = model.hidden_dim();
  FarForward f;
  f.degree.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k : nbrs[i]) f.degree[i] += weight(i, k);
  f.z = DenseMatrix(n, model.num_classes());
  std::vector<double> pre(h);
  for (std::size_t j = 0; j < n; ++j) {
    if (!want[j]) continue;
    for (std::size_t c = 0; c < h; ++c) pre[c] = xw1(j, c) / f.degree[j];
    for (std::size_t k : nbrs[j]) {
      const double coef = weight(j, k) / std::sqrt(f.degree[j] * f.degree[k]);
      for (std::size_t c = 0; c < h; ++c) pre[c] += coef * xw1(k, c);
    }
    for (std::size_t c = 0; c < h; ++c) pre[c] = std::max(pre[c], 0.0);
    for (std::size_t o = 0; o < model.num_classes(); ++o) {
      double s = 0.0;
      for (std::size_t c = 0; c < h; ++c) s += pre[c] * model.w2(c, o);
      f.z(j, o) = s;
    }
  }
  return f;
}

/// d/dA_vj of a loss whose far-node dependence runs through channels with
/// gradients g = (degree, output, input).
double channel_derivative(const std::vector<DenseMatrix>& g, const FarForward& f, const DenseMatrix& xw1,
                          std::size_t j) {
  const double inv = 1.0 / std::sqrt(f.degree[j]);
  return g[0].item() + inv * dot(g[1].row(0), f.z.row(j)) + inv * dot(g[2].row(0), xw1.row(j));
}

RowGradient row_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                         const DenseMatrix* mask0, std::size_t v, int label, double lambda, int inner_steps,
                         double inner_lr) {
  const std::size_t n = adjacency.rows();
  if (adjacency.cols() != n || xw1.rows() != n || xw1.cols() != model.hidden_dim())
    throw ad::ShapeError("row gradient: adjacency " + ad::shape_string(adjacency) + " and projection " +
                         ad::shape_string(xw1) + " disagree");
  if (v >= n) throw std::out_of_range("row gradient: node " + std::to_string(v) + " out of range");
  if (inner_steps < 0) throw std::invalid_argument("geattack: negative inner step count");
  const bool masked = mask0 != nullptr;
  if (masked && (mask0->rows() != n || mask0->cols() != n))
    throw ad::ShapeError("row gradient: mask " + ad::shape_string(*mask0) + " for " + std::to_string(n) + " nodes");

  const auto region = graph::k_hop_nodes(adjacency, v, 4);
  const std::size_t s = region.size();
  const std::size_t h = model.hidden_dim();
  std::vector<std::ptrdiff_t> local(n, -1);
  for (std::size_t i = 0; i < s; ++i) local[region[i]] = static_cast<std::ptrdiff_t>(i);
  const std::size_t lv = static_cast<std::size_t>(local[v]);

  std::vector<std::vector<std::size_t>> nbrs(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (adjacency(i, k) != 0.0) nbrs[i].push_back(k);

  std::vector<char> far(n, 0);
  for (std::size_t j = 0; j < n; ++j) far[j] = local[j] < 0;
  auto plain_w = [&](std::size_t i, std::size_t k) { return adjacency(i, k); };
  auto sym = [&](std::size_t i, std::size_t k) { return sigmoid(0.5 * ((*mask0)(i, k) + (*mask0)(k, i))); };
  auto masked_w = [&](std::size_t i, std::size_t k) { return adjacency(i, k) * sym(i, k); };
  const FarForward plain = far_forward(model, nbrs, xw1, far, plain_w);
  FarForward mfar;
  if (masked) mfar = far_forward(model, nbrs, xw1, far, masked_w);

  // Offsets for edges leaving the region, at their fixed weights.
  auto offsets = [&](const FarForward& f, auto weight, DenseMatrix& deg, DenseMatrix& pre) {
    deg = DenseMatrix(s, 1);
    pre = DenseMatrix(s, h);
    for (std::size_t li = 0; li < s; ++li) {
      const std::size_t i = region[li];
      for (std::size_t k : nbrs[i]) {
        if (local[k] >= 0) continue;
        const double wk = weight(i, k);
        deg(li, 0) += wk;
        const double coef = wk / std::sqrt(f.degree[i] * f.degree[k]);
        for (std::size_t c = 0; c < h; ++c) pre(li, c) += coef * xw1(k, c);
      }
    }
  };

  Tape t;
  DiffValue a = t.variable(graph::induced_submatrix(adjacency, region));
  DenseMatrix xs(s, h);
  for (std::size_t li = 0; li < s; ++li)
    for (std::size_t c = 0; c < h; ++c) xs(li, c) = xw1(region[li], c);
  DiffValue x = t.constant(std::move(xs));
  const Channels plain_ch = channel_variables(t, h, model.num_classes());
  // One set per inner step, so each inner loss sees its own channels as partials.
  std::vector<Channels> mask_ch;

  DenseMatrix deg_off, pre_off;
  offsets(plain, plain_w, deg_off, pre_off);
  DiffValue l_gnn = gcn::nll_loss(local_probs(model, a, x, t.constant(deg_off), t.constant(pre_off), plain_ch, lv),
                                  0, label);

  RowGradient out;
  out.q.assign(n, 0.0);
  out.l_gnn = l_gnn.value().item();

  DiffValue total = l_gnn;
  std::vector<DenseMatrix> inner_channels;  // summed channel gradients of the inner losses
  DiffValue m;
  if (masked) {
    DenseMatrix mdeg_off, mpre_off;
    offsets(mfar, masked_w, mdeg_off, mpre_off);
    DiffValue mdeg = t.constant(std::move(mdeg_off));
    DiffValue mpre = t.constant(std::move(mpre_off));
    m = t.variable(graph::induced_submatrix(*mask0, region));
    inner_channels = {DenseMatrix(1, 1), DenseMatrix(1, model.num_classes()), DenseMatrix(1, h)};
    for (int step = 0; step < inner_steps; ++step) {
      const Channels& ch = mask_ch.emplace_back(channel_variables(t, h, model.num_classes()));
      DiffValue w = ad::mul(a, ad::sigmoid(ad::symmetrize(m)));
      DiffValue loss = gcn::nll_loss(local_probs(model, w, x, mdeg, mpre, ch, lv), 0, label);
      const DiffValue wrt[] = {m, ch.degree, ch.output, ch.input};
      auto g = t.gradient(loss, wrt);
      for (std::size_t c = 0; c < 3; ++c) {
        auto dst = inner_channels[c].values();
        auto src = g[c + 1].value().values();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      }
      m = ad::sub(m, ad::scale(g[0], inner_lr));
    }
    DenseMatrix b_row(1, s);
    for (std::size_t lj = 0; lj < s; ++lj)
      b_row(0, lj) = region[lj] == v ? 0.0 : 1.0 - adjacency(v, region[lj]);
    DiffValue l_expl = ad::sum(ad::mul(ad::select_row(m, lv), t.constant(std::move(b_row))));
    out.l_expl = l_expl.value().item();
    for (std::size_t j = 0; j < n; ++j)
      if (far[j]) out.l_expl += (*mask0)(v, j);  // far nodes are never adjacent to v
    total = ad::add(l_gnn, ad::scale(l_expl, lambda));
  }

  std::vector<DiffValue> wrt{a, plain_ch.degree, plain_ch.output, plain_ch.input};
  for (const Channels& ch : mask_ch) wrt.insert(wrt.end(), {ch.degree, ch.output, ch.input});
  auto g = t.gradient_values(total, wrt);
  const std::vector<DenseMatrix> plain_g(g.begin() + 1, g.begin() + 4);
  std::vector<DenseMatrix> mask_g = inner_channels;  // same shapes; summed over steps below
  for (auto& m_g : mask_g) std::fill(m_g.values().begin(), m_g.values().end(), 0.0);
  for (std::size_t k = 4; k < g.size(); ++k) {
    auto dst = mask_g[(k - 4) % 3].values();
    auto src = g[k].values();
    for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += src[e];
  }
  for (std::size_t lj = 0; lj < s; ++lj)
    out.q[region[lj]] = 0.5 * (g[0](lv, lj) + g[0](lj, lv));
  for (std::size_t j = 0; j < n; ++j) {
    if (!far[j]) continue;
    double d = channel_derivative(plain_g, plain, xw1, j);
    if (masked && inner_steps > 0) {
      const double sj = sym(v, j);
      d += sj * channel_derivative(mask_g, mfar, xw1, j);
      // The final mask entry (v, j) moves with A_vj through every inner step.
      d -= lambda * inner_lr * 0.5 * sj * (1.0 - sj) * channel_derivative(inner_channels, mfar, xw1, j);
    }
    out.q[j] = 0.5 * d;  // the (j, v) entry has no first-order effect
  }
  out.q[v] = 0.0;
  return out;
}

}  // namespace

RowGradient geattack_row_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                                  const DenseMatrix& mask0, std::size_t v, int target_label, double lambda,
                                  int inner_steps, double inner_lr) {
  return row_gradient(model, adjacency, xw1, &mask0, v, target_label, lambda, inner_steps, inner_lr);
}

RowGradient nll_row_gradient(const gcn::GcnModel& model, const DenseMatrix& adjacency, const DenseMatrix& xw1,
                             std::size_t v, int label) {
  return row_gradient(model, adjacency, xw1, nullptr, v, label, 0.0, 0, 0.0);
}

}  // namespace geattack::attack
