#include "cdvi/network.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"
#include "cdvi/rng.hpp"

namespace cdvi {

namespace {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;

constexpr double kSigmaFloor = 1e-4;

struct Geometry {
  int frames = 0;
  int height = 0;
  int width = 0;

  int plane() const noexcept { return height * width; }
  Eigen::Index pixels() const noexcept { return static_cast<Eigen::Index>(frames) * plane(); }
};

Mat im2col(const Mat& in, const Geometry& g) {
  const Eigen::Index cin = in.rows();
  const int hw = g.plane();
  Mat col = Mat::Zero(cin * 9, g.pixels());
  for (int f = 0; f < g.frames; ++f) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const Eigen::Index j = f * hw + y * g.width + x;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= g.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= g.width) continue;
            const Eigen::Index s = f * hw + sy * g.width + sx;
            const int k = ky * 3 + kx;
            for (Eigen::Index ci = 0; ci < cin; ++ci) col(ci * 9 + k, j) = in(ci, s);
          }
        }
      }
    }
  }
  return col;
}

Mat col2im(const Mat& col, Eigen::Index cin, const Geometry& g) {
  const int hw = g.plane();
  Mat out = Mat::Zero(cin, g.pixels());
  for (int f = 0; f < g.frames; ++f) {
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        const Eigen::Index j = f * hw + y * g.width + x;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= g.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= g.width) continue;
            const Eigen::Index s = f * hw + sy * g.width + sx;
            const int k = ky * 3 + kx;
            for (Eigen::Index ci = 0; ci < cin; ++ci) out(ci, s) += col(ci * 9 + k, j);
          }
        }
      }
    }
  }
  return out;
}

Mat silu(const Mat& x) { return x.unaryExpr([](double v) { return v / (1.0 + std::exp(-v)); }); }

Mat silu_grad(const Mat& x) {
  return x.unaryExpr([](double v) {
    const double s = 1.0 / (1.0 + std::exp(-v));
    return s * (1.0 + v * (1.0 - s));
  });
}

struct BlockCache {
  Mat h_in, col1, c1, g, col2;
  Vec scale, shift;
};

struct AttnCache {
  Mat h_in, q, k, v, o;
  std::vector<Mat> probs;  // index pixel * heads + head, frames x frames
};

struct Cache {
  Geometry geo;
  Vec emb;
  Mat col_in;
  std::vector<BlockCache> blocks;
  AttnCache attn;
  Mat h_final, col_out;
  std::vector<int> positions;
};

class Net {
 public:
  Net(const ArchConfig& arch, const ParamLayout& layout, std::span<const double> w)
      : arch_(arch), layout_(layout), w_(w) {}

  CMap mat(const std::string& name) const {
    const ParamBlock& b = layout_.find(name);
    const auto rows = static_cast<Eigen::Index>(b.shape.front());
    return CMap(w_.data() + b.offset, rows, static_cast<Eigen::Index>(b.size) / rows);
  }
  Eigen::Map<const Vec> vec(const std::string& name) const {
    const ParamBlock& b = layout_.find(name);
    return Eigen::Map<const Vec>(w_.data() + b.offset, static_cast<Eigen::Index>(b.size));
  }

  int attn_index() const noexcept { return arch_.depth / 2; }

  Mat forward(const DenoiserInput& in, Cache& cache) const {
    const Geometry& g = cache.geo;
    const int hw = g.plane();
    const int c_img = arch_.channels;
    Mat x(c_img + 1, g.pixels());
    for (int f = 0; f < g.frames; ++f)
      for (int c = 0; c < c_img; ++c)
        for (int p = 0; p < hw; ++p) {
          const auto y = static_cast<std::size_t>(p / g.width), xx = static_cast<std::size_t>(p % g.width);
          x(c, f * hw + p) = in.frames(static_cast<std::size_t>(f), static_cast<std::size_t>(c), y, xx);
        }
    for (int f = 0; f < g.frames; ++f)
      for (int p = 0; p < hw; ++p)
        x(c_img, f * hw + p) = in.mask(static_cast<std::size_t>(f), static_cast<std::size_t>(p / g.width),
                                       static_cast<std::size_t>(p % g.width));

    cache.col_in = im2col(x, g);
    Mat h = mat("conv_in.w") * cache.col_in;
    h.colwise() += vec("conv_in.b");

    cache.blocks.resize(static_cast<std::size_t>(arch_.depth));
    for (int i = 0; i <= arch_.depth; ++i) {
      if (i == attn_index()) h = attention_forward(h, cache);
      if (i < arch_.depth) h = block_forward(i, h, cache);
    }
    cache.h_final = h;
    cache.col_out = im2col(silu(h), g);
    Mat out = mat("conv_out.w") * cache.col_out;
    out.colwise() += vec("conv_out.b");
    return out;
  }

  void backward(const Mat& d_out, const Cache& cache, std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    gmat(grad, "conv_out.w").noalias() += d_out * cache.col_out.transpose();
    gvec(grad, "conv_out.b") += d_out.rowwise().sum();
    Mat dh = col2im(mat("conv_out.w").transpose() * d_out, arch_.width, cache.geo)
                 .cwiseProduct(silu_grad(cache.h_final));
    for (int i = arch_.depth; i >= 0; --i) {
      if (i < arch_.depth) block_backward(i, dh, cache, grad);
      if (i == attn_index()) attention_backward(dh, cache, grad);
    }
    gmat(grad, "conv_in.w").noalias() += dh * cache.col_in.transpose();
    gvec(grad, "conv_in.b") += dh.rowwise().sum();
  }

 private:
  MMap gmat(std::span<double> grad, const std::string& name) const {
    const ParamBlock& b = layout_.find(name);
    const auto rows = static_cast<Eigen::Index>(b.shape.front());
    return MMap(grad.data() + b.offset, rows, static_cast<Eigen::Index>(b.size) / rows);
  }
  Eigen::Map<Vec> gvec(std::span<double> grad, const std::string& name) const {
    const ParamBlock& b = layout_.find(name);
    return Eigen::Map<Vec>(grad.data() + b.offset, static_cast<Eigen::Index>(b.size));
  }

  static std::string block_name(int i, const char* part) { return fmt::format("block{}.{}", i, part); }

  Mat block_forward(int i, const Mat& h, Cache& cache) const {
    BlockCache& bc = cache.blocks[static_cast<std::size_t>(i)];
    const Eigen::Index d = arch_.width;
    bc.h_in = h;
    bc.col1 = im2col(silu(h), cache.geo);
    bc.c1 = mat(block_name(i, "conv1.w")) * bc.col1;
    bc.c1.colwise() += vec(block_name(i, "conv1.b"));
    const Vec film = mat(block_name(i, "film.w")) * cache.emb + vec(block_name(i, "film.b"));
    bc.scale = film.head(d);
    bc.shift = film.tail(d);
    bc.g = bc.c1.array().colwise() * (1.0 + bc.scale.array());
    bc.g.colwise() += bc.shift;
    bc.col2 = im2col(silu(bc.g), cache.geo);
    Mat c2 = mat(block_name(i, "conv2.w")) * bc.col2;
    c2.colwise() += vec(block_name(i, "conv2.b"));
    return h + c2;
  }

  void block_backward(int i, Mat& dh, const Cache& cache, std::span<double> grad) const {
    const BlockCache& bc = cache.blocks[static_cast<std::size_t>(i)];
    const Eigen::Index d = arch_.width;
    gmat(grad, block_name(i, "conv2.w")).noalias() += dh * bc.col2.transpose();
    gvec(grad, block_name(i, "conv2.b")) += dh.rowwise().sum();
    const Mat dg = col2im(mat(block_name(i, "conv2.w")).transpose() * dh, d, cache.geo).cwiseProduct(silu_grad(bc.g));
    Vec dfilm(2 * d);
    dfilm.head(d) = dg.cwiseProduct(bc.c1).rowwise().sum();
    dfilm.tail(d) = dg.rowwise().sum();
    gmat(grad, block_name(i, "film.w")).noalias() += dfilm * cache.emb.transpose();
    gvec(grad, block_name(i, "film.b")) += dfilm;
    const Mat dc1 = dg.array().colwise() * (1.0 + bc.scale.array());
    gmat(grad, block_name(i, "conv1.w")).noalias() += dc1 * bc.col1.transpose();
    gvec(grad, block_name(i, "conv1.b")) += dc1.rowwise().sum();
    dh += col2im(mat(block_name(i, "conv1.w")).transpose() * dc1, d, cache.geo).cwiseProduct(silu_grad(bc.h_in));
  }

  int rel_slot(int from, int to) const noexcept {
    const int r = arch_.max_relative;
    return std::clamp(to - from, -r, r) + r;
  }

  Mat attention_forward(const Mat& h, Cache& cache) const {
    AttnCache& ac = cache.attn;
    const Geometry& g = cache.geo;
    const int hw = g.plane(), nf = g.frames, heads = arch_.heads;
    const Eigen::Index a = arch_.width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(a));
    const CMap rel = mat("attn.rel_bias");
    ac.h_in = h;
    ac.q = mat("attn.wq") * h;
    ac.k = mat("attn.wk") * h;
    ac.v = mat("attn.wv") * h;
    ac.o = Mat::Zero(arch_.width, g.pixels());
    ac.probs.assign(static_cast<std::size_t>(hw * heads), Mat());
    for (int p = 0; p < hw; ++p) {
      for (int hd = 0; hd < heads; ++hd) {
        Mat logits(nf, nf);
        for (int f = 0; f < nf; ++f)
          for (int t = 0; t < nf; ++t)
            logits(f, t) = inv_sqrt * ac.q.col(f * hw + p).segment(hd * a, a).dot(ac.k.col(t * hw + p).segment(hd * a, a)) +
                           rel(hd, rel_slot(cache.positions[static_cast<std::size_t>(f)],
                                            cache.positions[static_cast<std::size_t>(t)]));
        for (int f = 0; f < nf; ++f) {
          const double mx = logits.row(f).maxCoeff();
          logits.row(f) = (logits.row(f).array() - mx).exp();
          logits.row(f) /= logits.row(f).sum();
        }
        for (int f = 0; f < nf; ++f)
          for (int t = 0; t < nf; ++t)
            ac.o.col(f * hw + p).segment(hd * a, a) += logits(f, t) * ac.v.col(t * hw + p).segment(hd * a, a);
        ac.probs[static_cast<std::size_t>(p * heads + hd)] = std::move(logits);
      }
    }
    return h + mat("attn.wo") * ac.o;
  }

  void attention_backward(Mat& dh, const Cache& cache, std::span<double> grad) const {
    const AttnCache& ac = cache.attn;
    const Geometry& g = cache.geo;
    const int hw = g.plane(), nf = g.frames, heads = arch_.heads;
    const Eigen::Index a = arch_.width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(a));
    gmat(grad, "attn.wo").noalias() += dh * ac.o.transpose();
    const Mat d_o = mat("attn.wo").transpose() * dh;
    Mat dq = Mat::Zero(arch_.width, g.pixels());
    Mat dk = Mat::Zero(arch_.width, g.pixels());
    Mat dv = Mat::Zero(arch_.width, g.pixels());
    MMap drel = gmat(grad, "attn.rel_bias");
    for (int p = 0; p < hw; ++p) {
      for (int hd = 0; hd < heads; ++hd) {
        const Mat& prob = ac.probs[static_cast<std::size_t>(p * heads + hd)];
        Mat dprob(nf, nf);
        for (int f = 0; f < nf; ++f)
          for (int t = 0; t < nf; ++t) {
            dv.col(t * hw + p).segment(hd * a, a) += prob(f, t) * d_o.col(f * hw + p).segment(hd * a, a);
            dprob(f, t) = d_o.col(f * hw + p).segment(hd * a, a).dot(ac.v.col(t * hw + p).segment(hd * a, a));
          }
        for (int f = 0; f < nf; ++f) {
          const double inner = prob.row(f).dot(dprob.row(f));
          for (int t = 0; t < nf; ++t) {
            const double dl = prob(f, t) * (dprob(f, t) - inner);
            drel(hd, rel_slot(cache.positions[static_cast<std::size_t>(f)],
                              cache.positions[static_cast<std::size_t>(t)])) += dl;
            dq.col(f * hw + p).segment(hd * a, a) += dl * inv_sqrt * ac.k.col(t * hw + p).segment(hd * a, a);
            dk.col(t * hw + p).segment(hd * a, a) += dl * inv_sqrt * ac.q.col(f * hw + p).segment(hd * a, a);
          }
        }
      }
    }
    gmat(grad, "attn.wq").noalias() += dq * ac.h_in.transpose();
    gmat(grad, "attn.wk").noalias() += dk * ac.h_in.transpose();
    gmat(grad, "attn.wv").noalias() += dv * ac.h_in.transpose();
    dh.noalias() += mat("attn.wq").transpose() * dq;
    dh.noalias() += mat("attn.wk").transpose() * dk;
    dh.noalias() += mat("attn.wv").transpose() * dv;
  }

  const ArchConfig& arch_;
  const ParamLayout& layout_;
  std::span<const double> w_;
};

void check_arch(const ArchConfig& a) {
  if (a.channels < 1 || a.width < 1 || a.depth < 0 || a.heads < 1 || a.max_frames < 1 || a.noise_features < 0 ||
      a.max_relative < 0)
    throw ParameterError("denoiser", "architecture sizes must be positive");
  if (a.width % a.heads != 0)
    throw ParameterError("denoiser", fmt::format("width {} is not divisible by {} heads", a.width, a.heads));
}

Cache make_cache(const ArchConfig& arch, const DenoiserInput& in) {
  const std::size_t nf = in.frames.frames();
  if (nf == 0) throw ParameterError("denoiser", "denoiser call without frames");
  if (static_cast<int>(nf) > arch.max_frames)
    throw CapacityError("denoiser", fmt::format("{} frames exceed the budget of {}", nf, arch.max_frames));
  if (static_cast<int>(in.frames.channels()) != arch.channels)
    throw ParameterError("denoiser", fmt::format("expected {} channels, got {}", arch.channels, in.frames.channels()));
  if (!in.mask.matches(in.frames)) throw ParameterError("denoiser", "mask shape does not match frames");
  if (in.positions.size() != nf) throw ParameterError("denoiser", "one frame position per frame is required");
  Cache c;
  c.geo = {static_cast<int>(nf), static_cast<int>(in.frames.height()), static_cast<int>(in.frames.width())};
  const auto e = noise_embedding(in.sigma, arch.noise_features);
  c.emb = Eigen::Map<const Vec>(e.data(), static_cast<Eigen::Index>(e.size()));
  c.positions = in.positions;
  return c;
}

Video to_video(const Mat& out, const Geometry& g, int channels) {
  Video v(static_cast<std::size_t>(g.frames), static_cast<std::size_t>(channels), static_cast<std::size_t>(g.height),
          static_cast<std::size_t>(g.width));
  const int hw = g.plane();
  for (int f = 0; f < g.frames; ++f)
    for (int c = 0; c < channels; ++c)
      for (int p = 0; p < hw; ++p)
        v(static_cast<std::size_t>(f), static_cast<std::size_t>(c), static_cast<std::size_t>(p / g.width),
          static_cast<std::size_t>(p % g.width)) = out(c, f * hw + p);
  return v;
}

}  // namespace

const ParamBlock& ParamLayout::find(const std::string& name) const {
  for (const auto& b : blocks)
    if (b.name == name) return b;
  throw ParameterError("denoiser", fmt::format("no parameter block named '{}'", name));
}

ParamLayout make_layout(const ArchConfig& arch) {
  check_arch(arch);
  ParamLayout layout;
  auto add = [&](std::string name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int s : shape) size *= static_cast<std::size_t>(s);
    layout.blocks.push_back({std::move(name), std::move(shape), layout.total, size});
    layout.total += size;
  };
  const int d = arch.width, c = arch.channels, e = arch.embedding_dim();
  add("conv_in.w", {d, c + 1, 3, 3});
  add("conv_in.b", {d});
  for (int i = 0; i < arch.depth; ++i) {
    add(fmt::format("block{}.conv1.w", i), {d, d, 3, 3});
    add(fmt::format("block{}.conv1.b", i), {d});
    add(fmt::format("block{}.film.w", i), {2 * d, e});
    add(fmt::format("block{}.film.b", i), {2 * d});
    add(fmt::format("block{}.conv2.w", i), {d, d, 3, 3});
    add(fmt::format("block{}.conv2.b", i), {d});
  }
  add("attn.wq", {d, d});
  add("attn.wk", {d, d});
  add("attn.wv", {d, d});
  add("attn.wo", {d, d});
  add("attn.rel_bias", {arch.heads, 2 * arch.max_relative + 1});
  add("conv_out.w", {c, d, 3, 3});
  add("conv_out.b", {c});
  return layout;
}

DenoiserParams init_params(const ArchConfig& arch, std::uint64_t seed) {
  DenoiserParams p;
  p.arch = arch;
  p.layout = make_layout(arch);
  p.weights.assign(p.layout.total, 0.0);
  Rng rng(seed);
  for (const auto& b : p.layout.blocks) {
    const bool zero = b.shape.size() == 1 || b.name == "attn.wo" || b.name == "attn.rel_bias";
    if (zero) continue;
    const double fan_in = static_cast<double>(b.size) / b.shape.front();
    const double std = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = 0; i < b.size; ++i) p.weights[b.offset + i] = std * rng.normal();
  }
  p.ema = p.weights;
  return p;
}

void ema_update(DenoiserParams& params, double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ParameterError("denoiser", fmt::format("EMA rate {} outside [0, 1)", rate));
  if (params.ema.size() != params.weights.size()) params.ema.assign(params.weights.size(), 0.0);
  for (std::size_t i = 0; i < params.weights.size(); ++i)
    params.ema[i] = rate * params.ema[i] + (1.0 - rate) * params.weights[i];
}

std::vector<double> noise_embedding(double sigma, int features) {
  const double ls = std::log(std::max(sigma, kSigmaFloor));
  std::vector<double> e{ls / 4.0};
  for (int k = 0; k < features; ++k) {
    const double w = std::ldexp(1.0, k - 2);
    e.push_back(std::sin(w * ls));
    e.push_back(std::cos(w * ls));
  }
  return e;
}

NetworkDenoiser::NetworkDenoiser(ArchConfig arch, std::vector<double> weights)
    : arch_(arch), layout_(make_layout(arch)), weights_(std::move(weights)) {
  if (weights_.size() != layout_.total)
    throw ParameterError("denoiser", fmt::format("expected {} weights, got {}", layout_.total, weights_.size()));
}

Video NetworkDenoiser::predict_eps(const DenoiserInput& input) const {
  Cache cache = make_cache(arch_, input);
  const Net net(arch_, layout_, weights_);
  return to_video(net.forward(input, cache), cache.geo, arch_.channels);
}

Video network_forward(const ArchConfig& arch, std::span<const double> weights, const DenoiserInput& input) {
  const ParamLayout layout = make_layout(arch);
  if (weights.size() != layout.total) throw ParameterError("denoiser", "weight vector does not match the layout");
  Cache cache = make_cache(arch, input);
  const Net net(arch, layout, weights);
  return to_video(net.forward(input, cache), cache.geo, arch.channels);
}

double network_masked_loss(const ArchConfig& arch, std::span<const double> weights, const DenoiserInput& input,
                           const Video& target, std::span<double> grad) {
  const ParamLayout layout = make_layout(arch);
  if (weights.size() != layout.total) throw ParameterError("denoiser", "weight vector does not match the layout");
  if (!grad.empty() && grad.size() != layout.total)
    throw ParameterError("denoiser", "gradient buffer does not match the layout");
  if (!target.same_shape(input.frames)) throw ParameterError("denoiser", "target shape does not match frames");
  Cache cache = make_cache(arch, input);
  const std::size_t missing = input.mask.missing_count();
  if (missing == 0) {
    std::fill(grad.begin(), grad.end(), 0.0);
    return 0.0;
  }
  const Net net(arch, layout, weights);
  const Mat out = net.forward(input, cache);
  const Geometry& g = cache.geo;
  const int hw = g.plane();
  const double n = static_cast<double>(missing) * arch.channels;
  Mat d_out = Mat::Zero(out.rows(), out.cols());
  double loss = 0.0;
  for (int f = 0; f < g.frames; ++f) {
    for (int p = 0; p < hw; ++p) {
      const auto y = static_cast<std::size_t>(p / g.width), x = static_cast<std::size_t>(p % g.width);
      if (input.mask(static_cast<std::size_t>(f), y, x)) continue;
      for (int c = 0; c < arch.channels; ++c) {
        const double r = out(c, f * hw + p) - target(static_cast<std::size_t>(f), static_cast<std::size_t>(c), y, x);
        loss += r * r;
        d_out(c, f * hw + p) = 2.0 * r / n;
      }
    }
  }
  if (!grad.empty()) net.backward(d_out, cache, grad);
  return loss / n;
}

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = nlohmann::json{{"channels", a.channels},     {"width", a.width},
                     {"depth", a.depth},           {"heads", a.heads},
                     {"max_frames", a.max_frames}, {"noise_features", a.noise_features},
                     {"max_relative", a.max_relative}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.channels = j.value("channels", a.channels);
  a.width = j.value("width", a.width);
  a.depth = j.value("depth", a.depth);
  a.heads = j.value("heads", a.heads);
  a.max_frames = j.value("max_frames", a.max_frames);
  a.noise_features = j.value("noise_features", a.noise_features);
  a.max_relative = j.value("max_relative", a.max_relative);
  check_arch(a);
  return a;
}

void to_json(nlohmann::json& j, const ParamLayout& layout) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const auto& b : layout.blocks)
    blocks.push_back({{"name", b.name}, {"shape", b.shape}, {"offset", b.offset}, {"size", b.size}});
  j = nlohmann::json{{"total", layout.total}, {"blocks", std::move(blocks)}};
}

ParamLayout layout_from_json(const nlohmann::json& j) {
  ParamLayout layout;
  layout.total = j.at("total").get<std::size_t>();
  for (const auto& b : j.at("blocks"))
    layout.blocks.push_back({b.at("name").get<std::string>(), b.at("shape").get<std::vector<int>>(),
                             b.at("offset").get<std::size_t>(), b.at("size").get<std::size_t>()});
  return layout;
}

}  // namespace cdvi
