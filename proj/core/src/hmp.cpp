#include "relcast/hmp.hpp"

#include <stdexcept>

namespace relcast {

void HeteroGraph::validate() const {
  for (const auto& e : edges) {
    if (e.src_class < 0 || e.src_class >= static_cast<int32_t>(nodes.size()) ||
        e.dst_class < 0 || e.dst_class >= static_cast<int32_t>(nodes.size()))
      throw std::invalid_argument("hetero graph: edge class references unknown node class");
    if (e.src.size() != e.dst.size())
      throw std::invalid_argument("hetero graph: src/dst length mismatch in " + e.name);
    const int64_t ns = nodes[static_cast<size_t>(e.src_class)].count();
    const int64_t nd = nodes[static_cast<size_t>(e.dst_class)].count();
    for (size_t k = 0; k < e.src.size(); ++k)
      if (e.src[k] < 0 || e.src[k] >= ns || e.dst[k] < 0 || e.dst[k] >= nd)
        throw std::invalid_argument("hetero graph: edge index out of range in " + e.name);
    if (e.rel_features.rows() != e.count())
      throw std::invalid_argument("hetero graph: one attribute row per edge required in " +
                                  e.name);
  }
  for (const auto& n : nodes)
    if (n.features.defined() && n.features.value().rows() != n.count())
      throw std::invalid_argument("hetero graph: feature row count mismatch in " + n.name);
}

void HeteroGraph::compute_rel_features() {
  const int64_t width = RelGeom::width(n_freq);
  for (auto& e : edges) {
    e.rel_features = Tensor::zeros({e.count(), width});
    for (int64_t k = 0; k < e.count(); ++k) {
      const Pose2& src = nodes[static_cast<size_t>(e.src_class)].poses[static_cast<size_t>(e.src[k])];
      const Pose2& dst = nodes[static_cast<size_t>(e.dst_class)].poses[static_cast<size_t>(e.dst[k])];
      const auto row = rel_geom(src, dst, n_freq, freq_sign).to_vector();
      for (int64_t c = 0; c < width; ++c) e.rel_features.set(k, c, row[static_cast<size_t>(c)]);
    }
  }
}

EdgeSet make_edges(std::string name, int32_t src_class, int32_t dst_class,
                   std::vector<std::pair<int32_t, int32_t>> pairs) {
  EdgeSet e;
  e.name = std::move(name);
  e.src_class = src_class;
  e.dst_class = dst_class;
  e.src.reserve(pairs.size());
  e.dst.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    e.src.push_back(i);
    e.dst.push_back(j);
  }
  return e;
}

std::vector<ad::Var> encode_edge_attrs(const HeteroGraph& g, const ad::MlpParams& pairpose) {
  std::vector<ad::Var> attrs;
  attrs.reserve(g.edges.size());
  const Dtype dt = g.nodes.empty() ? Dtype::f64 : g.nodes[0].features.value().dtype();
  for (const auto& e : g.edges)
    attrs.push_back(ad::mlp(ad::constant(e.rel_features.to(dt)), pairpose));
  return attrs;
}

std::vector<ad::Var> hmp_layer(const HeteroGraph& g, const std::vector<ad::Var>& features,
                               const std::vector<ad::Var>& attrs, const HmpLayerParams& p,
                               bool use_pairpose) {
  if (features.size() != g.nodes.size() || p.message.size() != g.edges.size() ||
      p.self_proj.size() != g.nodes.size())
    throw std::invalid_argument("hmp_layer: parameter/graph arity mismatch");
  const int64_t hidden = p.fuse.empty() ? 0 : p.fuse[0].w.value().cols();
  const Dtype dt = features.empty() ? Dtype::f64 : features[0].value().dtype();

  std::vector<ad::Var> out(g.nodes.size());
  for (size_t j = 0; j < g.nodes.size(); ++j) {
    const int64_t n_dst = g.nodes[j].count();

    // messages from every incoming edge class, pooled in one union max
    std::vector<ad::Var> msgs;
    std::vector<int64_t> seg_ids;
    for (size_t c = 0; c < g.edges.size(); ++c) {
      const auto& e = g.edges[c];
      if (e.dst_class != static_cast<int32_t>(j) || e.count() == 0) continue;
      ad::Var src_feats = ad::gather_rows(features[static_cast<size_t>(e.src_class)], e.src);
      ad::Var msg_in = use_pairpose ? ad::concat_cols({src_feats, attrs[c]}) : src_feats;
      msgs.push_back(ad::linear(msg_in, p.message[c]));
      seg_ids.insert(seg_ids.end(), e.dst.begin(), e.dst.end());
    }
    ad::Var agg = msgs.empty()
                      ? ad::constant(Tensor::zeros({n_dst, hidden}, dt))
                      : ad::segment_max(msgs.size() == 1 ? msgs[0] : ad::concat_rows(msgs),
                                        seg_ids, n_dst);

    ad::Var self = ad::linear(features[j], p.self_proj[j]);
    ad::Var fused = ad::linear(ad::concat_cols({agg, self}), p.fuse[j]);
    ad::Var state = ad::linear(features[j], p.state_proj[j]);
    out[j] = ad::gru_cell(state, fused, p.update[j]);
  }
  return out;
}

std::vector<ad::Var> hmp_stack(const HeteroGraph& g, std::vector<ad::Var> features,
                               const HmpStageParams& p) {
  g.validate();
  std::vector<ad::Var> attrs;
  if (p.use_pairpose) attrs = encode_edge_attrs(g, p.pairpose);  // once per pass, not per layer
  for (const auto& layer : p.layers)
    features = hmp_layer(g, features, attrs, layer, p.use_pairpose);
  return features;
}

HmpStageParams make_hmp_stage(ad::ParamStore& store, Rng& rng, const std::string& prefix,
                              const std::vector<int64_t>& node_widths,
                              const std::vector<std::pair<int32_t, int32_t>>& edge_endpoints,
                              const std::vector<std::string>& edge_names, int64_t attr_dim,
                              int64_t hidden, int n_layers, int n_freq, bool use_pairpose) {
  HmpStageParams stage;
  stage.use_pairpose = use_pairpose;
  if (use_pairpose) {
    const int64_t in = RelGeom::width(n_freq);
    stage.pairpose.layers.push_back(
        {store.create(prefix + ".pairpose.l0.w", {in, attr_dim}, ad::Init::uniform_fan_in, rng),
         store.create(prefix + ".pairpose.l0.b", {attr_dim}, ad::Init::zeros, rng)});
    stage.pairpose.layers.push_back(
        {store.create(prefix + ".pairpose.l1.w", {attr_dim, attr_dim},
                      ad::Init::uniform_fan_in, rng),
         store.create(prefix + ".pairpose.l1.b", {attr_dim}, ad::Init::zeros, rng)});
  }
  for (int l = 0; l < n_layers; ++l) {
    HmpLayerParams layer;
    const std::string lp = prefix + ".layer" + std::to_string(l);
    for (size_t c = 0; c < edge_endpoints.size(); ++c) {
      const int64_t src_w = l == 0 ? node_widths[static_cast<size_t>(edge_endpoints[c].first)]
                                   : hidden;
      const int64_t in_w = src_w + (use_pairpose ? attr_dim : 0);
      const std::string mp = lp + ".msg." + edge_names[c];
      layer.message.push_back(
          {store.create(mp + ".w", {in_w, hidden}, ad::Init::uniform_fan_in, rng),
           store.create(mp + ".b", {hidden}, ad::Init::zeros, rng)});
    }
    for (size_t j = 0; j < node_widths.size(); ++j) {
      const int64_t f_in = l == 0 ? node_widths[j] : hidden;
      const std::string np = lp + ".node" + std::to_string(j);
      layer.state_proj.push_back(
          {store.create(np + ".state.w", {f_in, hidden}, ad::Init::uniform_fan_in, rng),
           store.create(np + ".state.b", {hidden}, ad::Init::zeros, rng)});
      layer.self_proj.push_back(
          {store.create(np + ".self.w", {f_in, hidden}, ad::Init::uniform_fan_in, rng),
           store.create(np + ".self.b", {hidden}, ad::Init::zeros, rng)});
      layer.fuse.push_back(
          {store.create(np + ".fuse.w", {2 * hidden, hidden}, ad::Init::uniform_fan_in, rng),
           store.create(np + ".fuse.b", {hidden}, ad::Init::zeros, rng)});
      ad::GruParams gru;
      gru.wz = store.create(np + ".gru.wz", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.uz = store.create(np + ".gru.uz", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.bz = store.create(np + ".gru.bz", {hidden}, ad::Init::zeros, rng);
      gru.wr = store.create(np + ".gru.wr", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.ur = store.create(np + ".gru.ur", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.br = store.create(np + ".gru.br", {hidden}, ad::Init::zeros, rng);
      gru.wn = store.create(np + ".gru.wn", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.un = store.create(np + ".gru.un", {hidden, hidden}, ad::Init::uniform_fan_in, rng);
      gru.bn = store.create(np + ".gru.bn", {hidden}, ad::Init::zeros, rng);
      layer.update.push_back(gru);
    }
    stage.layers.push_back(std::move(layer));
  }
  return stage;
}

}  // namespace relcast
