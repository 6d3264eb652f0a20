#include "statknn/plnet.hpp"

#include "statknn/error.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <string>

namespace statknn::plnet {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

Index pool_out(Index in, const MaxPool& p) { return (in - p.window) / p.stride + 1; }

}  // namespace

Network::Network(Index input_dim, std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(input_dim >= 1, ErrorKind::Config, "network input dimension must be positive");
  dims_.push_back(input_dim);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Index in = dims_.back();
    const std::string where = "layer " + std::to_string(l) + ": ";
    const Index out = std::visit(
        overloaded{
            [&](const Affine& a) {
              require(a.weight.cols() == in, ErrorKind::Config, where + "affine input width mismatch");
              require(a.bias.size() == a.weight.rows(), ErrorKind::Config, where + "bias length mismatch");
              require(a.weight.allFinite() && a.bias.allFinite(), ErrorKind::Config, where + "non-finite weights");
              return a.weight.rows();
            },
            [&](const Relu&) { return in; },
            [&](const MaxPool& p) {
              require(p.window >= 1 && p.stride >= 1 && p.window <= in, ErrorKind::Config,
                      where + "invalid max-pool window");
              return pool_out(in, p);
            }},
        layers_[l]);
    require(out >= 1, ErrorKind::Config, where + "empty output");
    dims_.push_back(out);
  }
}

ForwardResult forward(const Network& net, const Vector& x) {
  require(x.size() == net.input_dim(), ErrorKind::Data, "network input has wrong dimension");
  ForwardResult res;
  Vector h = x;
  for (const Layer& layer : net.layers()) {
    std::visit(overloaded{[&](const Affine& a) {
                            h = a.weight * h + a.bias;
                            res.pattern.layers.emplace_back(std::monostate{});
                          },
                          [&](const Relu&) {
                            ReluMask mask;
                            mask.active.resize(h.size());
                            for (Index u = 0; u < h.size(); ++u) {
                              mask.active[u] = h[u] > 0.0;
                              if (!mask.active[u]) h[u] = 0.0;
                            }
                            res.pattern.layers.emplace_back(std::move(mask));
                          },
                          [&](const MaxPool& p) {
                            PoolChoice choice;
                            const Index out = pool_out(h.size(), p);
                            Vector pooled(out);
                            for (Index w = 0; w < out; ++w) {
                              Index best = w * p.stride;
                              for (Index t = best + 1; t < w * p.stride + p.window; ++t)
                                if (h[t] > h[best]) best = t;
                              choice.argmax.push_back(best);
                              pooled[w] = h[best];
                            }
                            h = std::move(pooled);
                            res.pattern.layers.emplace_back(std::move(choice));
                          }},
               layer);
  }
  res.latent = std::move(h);
  return res;
}

namespace {

void check_pattern(const Network& net, const ActivationPattern& pattern) {
  require(pattern.layers.size() == net.layers().size(), ErrorKind::Invariant,
          "activation pattern does not match network depth");
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const Index in = net.dims()[l];
    const bool ok = std::visit(
        overloaded{[&](const Affine&) { return std::holds_alternative<std::monostate>(pattern.layers[l]); },
                   [&](const Relu&) {
                     const auto* m = std::get_if<ReluMask>(&pattern.layers[l]);
                     return m != nullptr && static_cast<Index>(m->active.size()) == in;
                   },
                   [&](const MaxPool& p) {
                     const auto* c = std::get_if<PoolChoice>(&pattern.layers[l]);
                     if (c == nullptr || static_cast<Index>(c->argmax.size()) != pool_out(in, p)) return false;
                     for (std::size_t w = 0; w < c->argmax.size(); ++w) {
                       const Index start = static_cast<Index>(w) * p.stride;
                       if (c->argmax[w] < start || c->argmax[w] >= start + p.window) return false;
                     }
                     return true;
                   }},
        net.layers()[l]);
    require(ok, ErrorKind::Invariant, "activation pattern shape mismatch at layer " + std::to_string(l));
  }
}

// Walks the network under a fixed pattern, keeping the running affine map
// (weight, bias) from input to the current layer. `on_relu` / `on_pool`
// see the map of the values entering that layer.
template <class OnRelu, class OnPool>
AffineMap walk(const Network& net, const ActivationPattern& pattern, OnRelu&& on_relu, OnPool&& on_pool) {
  check_pattern(net, pattern);
  AffineMap map{Matrix::Identity(net.input_dim(), net.input_dim()), Vector::Zero(net.input_dim())};
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    std::visit(overloaded{[&](const Affine& a) {
                            map.bias = a.weight * map.bias + a.bias;
                            map.weight = a.weight * map.weight;
                          },
                          [&](const Relu&) {
                            const auto& mask = std::get<ReluMask>(pattern.layers[l]);
                            on_relu(map, mask);
                            for (Index u = 0; u < map.weight.rows(); ++u)
                              if (!mask.active[u]) {
                                map.weight.row(u).setZero();
                                map.bias[u] = 0.0;
                              }
                          },
                          [&](const MaxPool& p) {
                            const auto& choice = std::get<PoolChoice>(pattern.layers[l]);
                            on_pool(map, p, choice);
                            AffineMap next{Matrix(choice.argmax.size(), map.weight.cols()),
                                           Vector(static_cast<Index>(choice.argmax.size()))};
                            for (std::size_t w = 0; w < choice.argmax.size(); ++w) {
                              next.weight.row(static_cast<Index>(w)) = map.weight.row(choice.argmax[w]);
                              next.bias[static_cast<Index>(w)] = map.bias[choice.argmax[w]];
                            }
                            map = std::move(next);
                          }},
               net.layers()[l]);
  }
  return map;
}

}  // namespace

AffineMap affine_map(const Network& net, const ActivationPattern& pattern) {
  return walk(net, pattern, [](const AffineMap&, const ReluMask&) {},
              [](const AffineMap&, const MaxPool&, const PoolChoice&) {});
}

bool Polytope::contains(const Vector& x, double tol) const {
  return normals.rows() == 0 || slack(x).maxCoeff() <= tol;
}

Polytope polytope_ineqs(const Network& net, const ActivationPattern& pattern) {
  std::vector<std::pair<Vector, double>> rows;
  walk(
      net, pattern,
      [&](const AffineMap& map, const ReluMask& mask) {
        for (Index u = 0; u < map.weight.rows(); ++u) {
          // active: h_u >= 0 -> -h_u <= 0; inactive: h_u <= 0
          const double s = mask.active[u] ? -1.0 : 1.0;
          rows.emplace_back(s * map.weight.row(u).transpose(), s * map.bias[u]);
        }
      },
      [&](const AffineMap& map, const MaxPool& p, const PoolChoice& choice) {
        for (std::size_t w = 0; w < choice.argmax.size(); ++w) {
          const Index win = choice.argmax[w];
          const Index start = static_cast<Index>(w) * p.stride;
          for (Index t = start; t < start + p.window; ++t) {
            if (t == win) continue;
            // h_t - h_win <= 0
            rows.emplace_back((map.weight.row(t) - map.weight.row(win)).transpose(),
                              map.bias[t] - map.bias[win]);
          }
        }
      });
  Polytope poly{Matrix(static_cast<Index>(rows.size()), net.input_dim()),
                Vector(static_cast<Index>(rows.size()))};
  for (std::size_t r = 0; r < rows.size(); ++r) {
    poly.normals.row(static_cast<Index>(r)) = rows[r].first.transpose();
    poly.offsets[static_cast<Index>(r)] = rows[r].second;
  }
  return poly;
}

FeatureLines latent_feature_lines(const Network& net, const LineParam& line,
                                  std::span<const ActivationPattern> patterns) {
  const Index blocks = line.n + 1;
  require(static_cast<Index>(patterns.size()) == blocks, ErrorKind::Invariant, "one pattern per block required");
  require(line.d == net.input_dim(), ErrorKind::Data, "network input dimension does not match data");
  FeatureLines lines{Matrix(blocks, net.output_dim()), Matrix(blocks, net.output_dim())};
  for (Index blk = 0; blk < blocks; ++blk) {
    const AffineMap map = affine_map(net, patterns[static_cast<std::size_t>(blk)]);
    lines.offset.row(blk) = (map.weight * line.a_block(blk) + map.bias).transpose();
    lines.direction.row(blk) = (map.weight * line.b_block(blk)).transpose();
  }
  return lines;
}

std::vector<QuadIneq> dnn_events(const Network& net, const LineParam& line,
                                 std::span<const ActivationPattern> patterns) {
  const Index blocks = line.n + 1;
  require(static_cast<Index>(patterns.size()) == blocks, ErrorKind::Invariant, "one pattern per block required");
  std::vector<QuadIneq> out;
  for (Index blk = 0; blk < blocks; ++blk) {
    const auto dir = line.b_block(blk);
    if (dir.isZero(0.0)) continue;
    const Polytope poly = polytope_ineqs(net, patterns[static_cast<std::size_t>(blk)]);
    const Vector slope = poly.normals * dir;
    const Vector icept = poly.normals * line.a_block(blk) + poly.offsets;
    for (Index r = 0; r < slope.size(); ++r) out.push_back({0.0, slope[r], icept[r], EventTag::DNNPolytope});
  }
  return out;
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const Layer& layer : net.layers()) {
    std::visit(overloaded{[&](const Affine& a) {
                            layers.push_back({{"type", "affine"},
                                              {"rows", a.weight.rows()},
                                              {"cols", a.weight.cols()},
                                              {"weight", std::vector<double>(a.weight.data(), a.weight.data() + a.weight.size())},
                                              {"bias", std::vector<double>(a.bias.begin(), a.bias.end())}});
                          },
                          [&](const Relu&) { layers.push_back({{"type", "relu"}}); },
                          [&](const MaxPool& p) {
                            layers.push_back({{"type", "maxpool"}, {"window", p.window}, {"stride", p.stride}});
                          }},
               layer);
  }
  return {{"format", "plnet"}, {"version", 1}, {"input_dim", net.input_dim()}, {"layers", layers}};
}

Network from_json(const nlohmann::json& j) {
  try {
    std::vector<Layer> layers;
    for (const auto& l : j.at("layers")) {
      const std::string type = l.at("type").get<std::string>();
      if (type == "affine") {
        const auto rows = l.at("rows").get<Index>();
        const auto cols = l.at("cols").get<Index>();
        const auto w = l.at("weight").get<std::vector<double>>();
        const auto b = l.at("bias").get<std::vector<double>>();
        require(rows >= 1 && cols >= 1 && static_cast<Index>(w.size()) == rows * cols, ErrorKind::Config,
                "affine weight array length does not match rows*cols");
        require(static_cast<Index>(b.size()) == rows, ErrorKind::Config, "affine bias length mismatch");
        layers.emplace_back(Affine{Eigen::Map<const Matrix>(w.data(), rows, cols),
                                   Eigen::Map<const Vector>(b.data(), rows)});
      } else if (type == "relu") {
        layers.emplace_back(Relu{});
      } else if (type == "maxpool") {
        layers.emplace_back(MaxPool{l.at("window").get<Index>(), l.value("stride", l.at("window").get<Index>())});
      } else {
        fail(ErrorKind::Config, "unknown layer type '" + type + "'");
      }
    }
    return Network(j.at("input_dim").get<Index>(), std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, std::string("malformed network JSON: ") + e.what());
  }
}

Network load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::Config, "cannot open network file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Config, "cannot parse network file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void save(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  require(out.good(), ErrorKind::Config, "cannot write network file " + path.string());
  out << to_json(net).dump(2) << '\n';
}

Network random_network(const RandomNetSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss;
  std::vector<Layer> layers;
  Index in = spec.input_dim;
  auto dense = [&](Index out) {
    Affine a{Matrix(out, in), Vector(out)};
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (Index r = 0; r < out; ++r) {
      for (Index c = 0; c < in; ++c) a.weight(r, c) = scale * gauss(rng);
      a.bias[r] = 0.1 * gauss(rng);
    }
    layers.emplace_back(std::move(a));
    in = out;
  };
  for (Index h : spec.hidden) {
    dense(h);
    layers.emplace_back(Relu{});
  }
  if (spec.pool_window > 1) {
    dense(spec.latent_dim * spec.pool_window);
    layers.emplace_back(MaxPool{spec.pool_window, spec.pool_window});
  } else {
    dense(spec.latent_dim);
  }
  return Network(spec.input_dim, std::move(layers));
}

}  // namespace statknn::plnet
