#include "cdvi/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cdvi/error.hpp"
#include "cdvi/hash.hpp"

namespace cdvi {

namespace {

Stage make_stage(std::vector<int> latents, std::vector<int> observed, std::vector<int> incomplete = {}) {
  Stage s;
  s.latents = FrameIndexSet(std::move(latents));
  s.observed = FrameIndexSet(std::move(observed));
  s.incomplete.assign(s.observed.size(), false);
  for (std::size_t i = 0; i < s.observed.size(); ++i)
    s.incomplete[i] = std::find(incomplete.begin(), incomplete.end(), s.observed[i]) != incomplete.end();
  return s;
}

std::vector<int> iota_vec(int first, int last_exclusive) {
  std::vector<int> v;
  for (int i = first; i < last_exclusive; ++i) v.push_back(i);
  return v;
}

std::vector<Stage> plan_ar(int n, int k) {
  if (n <= k) return {make_stage(iota_vec(0, n), {})};
  std::vector<Stage> stages{make_stage(iota_vec(0, k), {})};
  const int half = k / 2;
  int next = k;
  while (next < n) {
    const int nx = std::min(half, n - next);
    stages.push_back(make_stage(iota_vec(next, next + nx), iota_vec(next - (k - nx), next)));
    next += nx;
  }
  return stages;
}

std::vector<int> spread_future(int first, int last, int count) {
  const int len = last - first + 1;
  if (len <= 0 || count <= 0) return {};
  if (len <= count) return iota_vec(first, last + 1);
  std::vector<int> out;
  for (int j = 1; j <= count; ++j)
    out.push_back(first - 1 + static_cast<int>(std::lround(static_cast<double>(len) * j / count)));
  return out;
}

std::vector<Stage> plan_lookahead(int n, int k, int past, int future, bool spread) {
  if (n <= k) return {make_stage(iota_vec(0, n), {})};
  const int latent = k - past - future;
  std::vector<Stage> stages;

  auto future_frames = [&](int after, int count) {
    return spread ? spread_future(after, n - 1, count) : iota_vec(after, std::min(n, after + count));
  };

  int n_first = k - future;
  std::vector<int> fut = future_frames(n_first, future);
  stages.push_back(make_stage(iota_vec(0, n_first), fut, fut));
  int next = n_first;
  while (next < n) {
    const int nx = std::min(latent, n - next);
    fut = future_frames(next + nx, future);
    const int n_future = static_cast<int>(fut.size());
    const int n_past = std::min(next, k - nx - n_future);
    std::vector<int> obs = iota_vec(next - n_past, next);
    obs.insert(obs.end(), fut.begin(), fut.end());
    stages.push_back(make_stage(iota_vec(next, next + nx), obs, fut));
    next += nx;
  }
  return stages;
}

std::vector<Stage> plan_hierarchy2(int n, int k) {
  if (n <= k) return {make_stage(iota_vec(0, n), {})};
  std::vector<int> keys;
  for (int i = 0; i < k; ++i)
    keys.push_back(static_cast<int>(std::lround(static_cast<double>(i) * (n - 1) / (k - 1))));
  std::vector<Stage> stages{make_stage(keys, {})};
  const int batch = k - 2;
  for (std::size_t g = 0; g + 1 < keys.size(); ++g) {
    const int a = keys[g], b = keys[g + 1];
    for (int start = a + 1; start < b; start += batch)
      stages.push_back(make_stage(iota_vec(start, std::min(b, start + batch)), {a, b}));
  }
  return stages;
}

std::vector<Stage> plan_multires(int n, int k, const std::vector<int>& strides, int past, int future) {
  if (n <= k) return {make_stage(iota_vec(0, n), {})};
  const int s0 = strides.front();
  std::vector<int> sub;
  for (int i = 0; i < n; i += s0) sub.push_back(i);
  std::vector<Stage> stages;
  for (const Stage& st : plan_lookahead(static_cast<int>(sub.size()), k, past, future, false)) {
    std::vector<int> x, y, inc;
    for (int i : st.latents) x.push_back(sub[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < st.observed.size(); ++j) {
      y.push_back(sub[static_cast<std::size_t>(st.observed[j])]);
      if (st.incomplete[j]) inc.push_back(y.back());
    }
    stages.push_back(make_stage(x, y, inc));
  }

  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (int f : sub) done[static_cast<std::size_t>(f)] = true;
  const int block = k / 2;
  for (std::size_t p = 1; p < strides.size(); ++p) {
    std::vector<int> pending;
    for (int i = 0; i < n; i += strides[p])
      if (!done[static_cast<std::size_t>(i)]) pending.push_back(i);
    for (std::size_t start = 0; start < pending.size(); start += static_cast<std::size_t>(block)) {
      const std::size_t stop = std::min(pending.size(), start + static_cast<std::size_t>(block));
      std::vector<int> x(pending.begin() + static_cast<std::ptrdiff_t>(start),
                         pending.begin() + static_cast<std::ptrdiff_t>(stop));
      std::vector<std::pair<int, int>> candidates;  // (distance, frame)
      for (int d = 0; d < n; ++d) {
        if (!done[static_cast<std::size_t>(d)]) continue;
        int dist = n;
        for (int xi : x) dist = std::min(dist, std::abs(d - xi));
        candidates.emplace_back(dist, d);
      }
      std::sort(candidates.begin(), candidates.end());
      const std::size_t ny = std::min(candidates.size(), static_cast<std::size_t>(k) - x.size());
      std::vector<int> y;
      for (std::size_t i = 0; i < ny; ++i) y.push_back(candidates[i].second);
      stages.push_back(make_stage(x, y));
      for (int xi : x) done[static_cast<std::size_t>(xi)] = true;
    }
  }
  return stages;
}

Stage mirror(const Stage& s, int n) {
  std::vector<int> x, y, inc;
  for (int f : s.latents) x.push_back(n - 1 - f);
  for (std::size_t j = 0; j < s.observed.size(); ++j) {
    y.push_back(n - 1 - s.observed[j]);
    if (s.incomplete[j]) inc.push_back(y.back());
  }
  return make_stage(x, y, inc);
}

}  // namespace

bool Stage::is_incomplete(int frame) const {
  for (std::size_t i = 0; i < observed.size(); ++i)
    if (observed[i] == frame) return i < incomplete.size() && incomplete[i];
  return false;
}

std::string_view to_string(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::ar: return "ar";
    case SchemeKind::reverse_ar: return "reverse-ar";
    case SchemeKind::hierarchy2: return "hierarchy-2";
    case SchemeKind::lookahead_ar: return "lookahead-ar";
    case SchemeKind::lookahead_ar_pp: return "lookahead-ar++";
    case SchemeKind::multires_ar2: return "multires-ar-2";
    case SchemeKind::multires_ar3: return "multires-ar-3";
  }
  return "ar";
}

SchemeKind scheme_kind_from_string(std::string_view name) {
  for (SchemeKind k : all_scheme_kinds())
    if (to_string(k) == name) return k;
  throw ParameterError("schemes", fmt::format("unknown scheme kind '{}'", name));
}

const std::vector<SchemeKind>& all_scheme_kinds() {
  static const std::vector<SchemeKind> kinds{SchemeKind::ar,           SchemeKind::reverse_ar,
                                             SchemeKind::hierarchy2,   SchemeKind::lookahead_ar,
                                             SchemeKind::lookahead_ar_pp, SchemeKind::multires_ar2,
                                             SchemeKind::multires_ar3};
  return kinds;
}

int min_budget(SchemeKind kind) noexcept {
  switch (kind) {
    case SchemeKind::ar:
    case SchemeKind::reverse_ar: return 2;
    case SchemeKind::hierarchy2: return 3;
    default: return 4;
  }
}

SamplingScheme plan(SchemeKind kind, int n_frames, int budget, const PlanOptions& options) {
  if (n_frames < 1) throw ParameterError("schemes", fmt::format("N must be >= 1, got {}", n_frames));
  if (budget < min_budget(kind))
    throw ParameterError("schemes", fmt::format("{} needs K >= {}, got {}", to_string(kind), min_budget(kind), budget));
  const int past = options.lookahead_past < 0 ? budget / 4 : options.lookahead_past;
  const int future = options.lookahead_future < 0 ? budget / 4 : options.lookahead_future;
  const bool lookahead_family = kind == SchemeKind::lookahead_ar || kind == SchemeKind::lookahead_ar_pp ||
                                kind == SchemeKind::multires_ar2 || kind == SchemeKind::multires_ar3;
  if (lookahead_family && budget - past - future < 1)
    throw ParameterError("schemes", "lookahead split leaves no latent slots");

  SamplingScheme s;
  s.kind = std::string(to_string(kind));
  s.n_frames = n_frames;
  s.budget = budget;
  switch (kind) {
    case SchemeKind::ar: s.stages = plan_ar(n_frames, budget); break;
    case SchemeKind::reverse_ar:
      for (const Stage& st : plan_ar(n_frames, budget)) s.stages.push_back(mirror(st, n_frames));
      break;
    case SchemeKind::hierarchy2: s.stages = plan_hierarchy2(n_frames, budget); break;
    case SchemeKind::lookahead_ar: s.stages = plan_lookahead(n_frames, budget, past, future, false); break;
    case SchemeKind::lookahead_ar_pp: s.stages = plan_lookahead(n_frames, budget, past, future, true); break;
    case SchemeKind::multires_ar2: s.stages = plan_multires(n_frames, budget, {3, 1}, past, future); break;
    case SchemeKind::multires_ar3: s.stages = plan_multires(n_frames, budget, {15, 5, 1}, past, future); break;
  }
  return s;
}

std::vector<Violation> validate(const SamplingScheme& scheme) {
  std::vector<Violation> out;
  const int n = scheme.n_frames;
  if (n < 1 || scheme.budget < 1) {
    out.push_back({-1, "shape", fmt::format("n_frames={} budget={}", n, scheme.budget)});
    return out;
  }
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  for (std::size_t si = 0; si < scheme.stages.size(); ++si) {
    const Stage& st = scheme.stages[si];
    const int s = static_cast<int>(si);
    if (st.latents.empty()) out.push_back({s, "empty-latents", "stage has no latent frames"});
    if (!st.latents.within(n) || !st.observed.within(n)) {
      out.push_back({s, "range", fmt::format("frame index >= {}", n)});
      continue;
    }
    if (!st.latents.disjoint(st.observed)) out.push_back({s, "overlap", "latent and observed sets intersect"});
    if (static_cast<int>(st.frame_count()) > scheme.budget)
      out.push_back({s, "budget", fmt::format("{} frames exceed K={}", st.frame_count(), scheme.budget)});
    if (st.incomplete.size() != st.observed.size())
      out.push_back({s, "flags", fmt::format("{} incomplete flags for {} observed frames", st.incomplete.size(),
                                             st.observed.size())});
    for (std::size_t j = 0; j < st.observed.size(); ++j) {
      const bool inc = j < st.incomplete.size() && st.incomplete[j];
      const int f = st.observed[j];
      const int o = owner[static_cast<std::size_t>(f)];
      if (!inc && (o < 0 || o >= s))
        out.push_back({s, "causality", fmt::format("frame {} observed before it is inpainted", f)});
    }
    for (int f : st.latents) {
      int& o = owner[static_cast<std::size_t>(f)];
      if (o >= 0)
        out.push_back({s, "duplicate-latent", fmt::format("frame {} already inpainted in stage {}", f, o)});
      else
        o = s;
    }
  }
  for (int f = 0; f < n; ++f)
    if (owner[static_cast<std::size_t>(f)] < 0)
      out.push_back({-1, "missing-frame", fmt::format("frame {} is never inpainted", f)});
  return out;
}

void to_json(nlohmann::json& j, const SamplingScheme& scheme) {
  nlohmann::json stages = nlohmann::json::array();
  for (const Stage& st : scheme.stages) {
    nlohmann::json inc = nlohmann::json::array();
    for (bool b : st.incomplete) inc.push_back(b);
    stages.push_back({{"x", st.latents.values()}, {"y", st.observed.values()}, {"incomplete", inc}});
  }
  j = nlohmann::json{{"kind", scheme.kind},
                     {"n_frames", scheme.n_frames},
                     {"budget", scheme.budget},
                     {"stages", std::move(stages)}};
}

SamplingScheme scheme_from_json(const nlohmann::json& j) {
  try {
    SamplingScheme s;
    s.kind = j.value("kind", std::string("custom"));
    s.n_frames = j.at("n_frames").get<int>();
    s.budget = j.at("budget").get<int>();
    for (const auto& st : j.at("stages")) {
      Stage stage;
      stage.latents = FrameIndexSet(st.at("x").get<std::vector<int>>());
      stage.observed = FrameIndexSet(st.at("y").get<std::vector<int>>());
      if (st.contains("incomplete"))
        stage.incomplete = st.at("incomplete").get<std::vector<bool>>();
      else
        stage.incomplete.assign(stage.observed.size(), false);
      s.stages.push_back(std::move(stage));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("schemes", fmt::format("malformed scheme JSON: {}", e.what()));
  }
}

std::string scheme_hash(const SamplingScheme& scheme) {
  nlohmann::json j = scheme;
  return hex64(fnv1a(j.dump()));
}

TrainingTask sample_training_task(const FrameIndexDistribution& dist, int n_frames, Rng& rng) {
  if (n_frames < 1) throw ParameterError("schemes", "N must be >= 1");
  if (dist.budget < 1) throw ParameterError("schemes", "budget must be >= 1");
  const int size = std::min(dist.budget, n_frames);
  TrainingTask task;
  if (rng.bernoulli(dist.consecutive_prob)) {
    task.consecutive = true;
    const int start = static_cast<int>(rng.range(0, n_frames - size));
    const int nx = static_cast<int>(rng.range(1, size));
    const int offset = static_cast<int>(rng.range(0, size - nx));
    std::vector<int> x, y;
    for (int i = 0; i < size; ++i) (i >= offset && i < offset + nx ? x : y).push_back(start + i);
    task.latents = FrameIndexSet(std::move(x));
    task.observed = FrameIndexSet(std::move(y));
    return task;
  }

  std::vector<int> chosen{static_cast<int>(rng.below(static_cast<std::uint64_t>(n_frames)))};
  std::set<int> seen(chosen.begin(), chosen.end());
  const double p = 1.0 / std::max(1.0, dist.mean_gap);
  for (int attempt = 0; static_cast<int>(chosen.size()) < size && attempt < 64 * size; ++attempt) {
    const int from = chosen[static_cast<std::size_t>(rng.below(chosen.size()))];
    const int gap = static_cast<int>(rng.geometric(p));
    const int f = std::clamp(rng.bernoulli(0.5) ? from + gap : from - gap, 0, n_frames - 1);
    if (seen.insert(f).second) chosen.push_back(f);
  }
  while (static_cast<int>(chosen.size()) < size) {
    const int f = static_cast<int>(rng.below(static_cast<std::uint64_t>(n_frames)));
    if (seen.insert(f).second) chosen.push_back(f);
  }
  // Fisher-Yates, then the first nx become latents.
  for (std::size_t i = chosen.size(); i > 1; --i) std::swap(chosen[i - 1], chosen[rng.below(i)]);
  const auto nx = static_cast<std::ptrdiff_t>(rng.range(1, size));
  task.latents = FrameIndexSet(std::vector<int>(chosen.begin(), chosen.begin() + nx));
  task.observed = FrameIndexSet(std::vector<int>(chosen.begin() + nx, chosen.end()));
  return task;
}

StageGrid render_plan(const SamplingScheme& scheme) {
  StageGrid g;
  g.rows = static_cast<int>(scheme.stages.size());
  g.cols = scheme.n_frames;
  g.cells.assign(static_cast<std::size_t>(g.rows * g.cols), Cell::empty);
  std::vector<bool> done(static_cast<std::size_t>(g.cols), false);
  for (int r = 0; r < g.rows; ++r) {
    const Stage& st = scheme.stages[static_cast<std::size_t>(r)];
    for (int c = 0; c < g.cols; ++c) {
      Cell& cell = g.cells[static_cast<std::size_t>(r * g.cols + c)];
      if (st.latents.contains(c))
        cell = Cell::latent;
      else if (st.observed.contains(c))
        cell = st.is_incomplete(c) ? Cell::observed_incomplete : Cell::observed_complete;
      else if (done[static_cast<std::size_t>(c)])
        cell = Cell::done;
    }
    for (int f : st.latents)
      if (f < g.cols) done[static_cast<std::size_t>(f)] = true;
  }
  return g;
}

std::string render_text(const StageGrid& grid) {
  std::string out;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      switch (grid.at(r, c)) {
        case Cell::empty: out += '.'; break;
        case Cell::latent: out += 'X'; break;
        case Cell::observed_complete: out += 'o'; break;
        case Cell::observed_incomplete: out += '*'; break;
        case Cell::done: out += '='; break;
      }
    }
    out += '\n';
  }
  return out;
}

std::string render_ppm(const StageGrid& grid, int cell) {
  struct Rgb {
    unsigned char r, g, b;
  };
  auto color = [](Cell c) -> Rgb {
    switch (c) {
      case Cell::latent: return {51, 237, 255};
      case Cell::observed_complete: return {99, 0, 0};
      case Cell::observed_incomplete: return {255, 0, 0};
      case Cell::done: return {161, 161, 161};
      case Cell::empty: break;
    }
    return {255, 255, 255};
  };
  const int w = std::max(1, grid.cols * cell), h = std::max(1, grid.rows * cell);
  std::string out = fmt::format("P6\n{} {}\n255\n", w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int r = y / std::max(1, cell), c = x / std::max(1, cell);
      // One-pixel white separators between cells keep the grid readable.
      const bool border = cell > 2 && (x % cell == cell - 1 || y % cell == cell - 1);
      const Rgb px = (border || r >= grid.rows || c >= grid.cols) ? Rgb{255, 255, 255} : color(grid.at(r, c));
      out += static_cast<char>(px.r);
      out += static_cast<char>(px.g);
      out += static_cast<char>(px.b);
    }
  }
  return out;
}

}  // namespace cdvi
