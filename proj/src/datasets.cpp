#include "gla/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gla/rng.hpp"

namespace gla::data {

namespace {

thread_local int g_training_depth = 0;

std::size_t count_classes(const std::optional<Labels>& a, const std::optional<Labels>& b) {
  int mx = -1;
  for (const auto* l : {&a, &b})
    if (*l)
      for (int v : **l) mx = std::max(mx, v);
  return static_cast<std::size_t>(mx + 1);
}

void split_by_label(const LabeledPoints& lp, int label, std::vector<std::size_t>& out) {
  for (std::size_t i = 0; i < lp.labels.size(); ++i)
    if (lp.labels[i] == label) out.push_back(i);
}

}  // namespace

TrainingScope::TrainingScope() { ++g_training_depth; }
TrainingScope::~TrainingScope() { --g_training_depth; }
bool TrainingScope::active() noexcept { return g_training_depth > 0; }

DomainPair::DomainPair(Tensor source_points, std::optional<Labels> source_labels,
                       Tensor target_points, std::optional<Labels> target_labels,
                       std::string provenance)
    : source_points_(std::move(source_points)),
      source_labels_(std::move(source_labels)),
      target_points_(std::move(target_points)),
      target_labels_(std::move(target_labels)),
      provenance_(std::move(provenance)) {
  source_points_.require_finite("source points");
  target_points_.require_finite("target points");
  if (source_labels_ && source_labels_->size() != source_points_.rows())
    throw ShapeError("DomainPair: source label count mismatch");
  if (target_labels_ && target_labels_->size() != target_points_.rows())
    throw ShapeError("DomainPair: target label count mismatch");
  num_classes_ = count_classes(source_labels_, target_labels_);
}

const Labels& DomainPair::source_labels() const {
  if (!source_labels_) throw std::logic_error("DomainPair: source is unlabeled");
  return *source_labels_;
}

const Labels& DomainPair::target_labels_for_evaluation() const {
  if (TrainingScope::active())
    throw LeakageError("target labels requested inside a training step");
  if (!target_labels_) throw std::logic_error("DomainPair: target is unlabeled");
  return *target_labels_;
}

Tensor gen_gaussian2d(Vec2 mean, Cov2 cov, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_gaussian2d: n must be >= 1");
  const double det = cov.xx * cov.yy - cov.xy * cov.xy;
  if (!(cov.xx > 0.0) || !(det > 0.0) || !std::isfinite(det))
    throw std::invalid_argument("gen_gaussian2d: covariance is not symmetric positive definite");
  // Cholesky factor L with L·Lᵀ = cov.
  const double l11 = std::sqrt(cov.xx);
  const double l21 = cov.xy / l11;
  const double l22 = std::sqrt(cov.yy - l21 * l21);
  Rng rng = make_rng(seed, Stream::kData);
  std::normal_distribution<double> nd(0.0, 1.0);
  Tensor out(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = nd(rng), v = nd(rng);
    out(i, 0) = mean[0] + l11 * u;
    out(i, 1) = mean[1] + l21 * u + l22 * v;
  }
  return out;
}

LabeledPoints gen_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("gen_moons: n must be >= 2");
  if (!(noise_std >= 0.0)) throw std::invalid_argument("gen_moons: negative noise_std");
  const std::size_t n0 = n / 2, n1 = n - n0;
  auto grid = [](std::size_t i, std::size_t count) {
    return count > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1)
                     : 0.0;
  };
  LabeledPoints lp{Tensor(n, 2), Labels(n)};
  for (std::size_t i = 0; i < n0; ++i) {
    const double t = grid(i, n0);
    lp.points(i, 0) = std::cos(t);
    lp.points(i, 1) = std::sin(t);
    lp.labels[i] = 0;
  }
  for (std::size_t i = 0; i < n1; ++i) {
    const double t = grid(i, n1);
    lp.points(n0 + i, 0) = 1.0 - std::cos(t);
    lp.points(n0 + i, 1) = 0.5 - std::sin(t);
    lp.labels[n0 + i] = 1;
  }
  if (noise_std > 0.0) {
    Rng rng = make_rng(seed, Stream::kData);
    std::normal_distribution<double> nd(0.0, noise_std);
    for (double& v : lp.points.values()) v += nd(rng);
  }
  return lp;
}

LabeledPoints gen_blobs(std::span<const Vec2> centers, double std, std::size_t n_per_center,
                        std::uint64_t seed) {
  if (centers.empty()) throw std::invalid_argument("gen_blobs: empty centers");
  if (!(std > 0.0)) throw std::invalid_argument("gen_blobs: std must be > 0");
  Rng rng = make_rng(seed, Stream::kData);
  std::normal_distribution<double> nd(0.0, std);
  const std::size_t n = centers.size() * n_per_center;
  LabeledPoints lp{Tensor(n, 2), Labels(n)};
  for (std::size_t c = 0; c < centers.size(); ++c)
    for (std::size_t i = 0; i < n_per_center; ++i) {
      const std::size_t r = c * n_per_center + i;
      lp.points(r, 0) = centers[c][0] + nd(rng);
      lp.points(r, 1) = centers[c][1] + nd(rng);
      lp.labels[r] = static_cast<int>(c);
    }
  return lp;
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "gauss") return TaskKind::kGauss;
  if (name == "moons") return TaskKind::kMoons;
  if (name == "blobs") return TaskKind::kBlobs;
  throw std::invalid_argument("unknown task kind '" + name + "'");
}

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kGauss: return "gauss";
    case TaskKind::kMoons: return "moons";
    case TaskKind::kBlobs: return "blobs";
  }
  return "?";
}

Tensor Shift::apply(const Tensor& points, Vec2 default_pivot) const {
  if (!(std::isfinite(scale) && scale != 0.0) || !std::isfinite(angle_deg))
    throw std::invalid_argument("shift: degenerate (non-invertible) transform");
  const Vec2 p = pivot.value_or(default_pivot);
  const double th = angle_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  Tensor out(points.rows(), 2);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0) - p[0], y = points(i, 1) - p[1];
    out(i, 0) = scale * (c * x - s * y) + p[0] + translation[0];
    out(i, 1) = scale * (s * x + c * y) + p[1] + translation[1];
  }
  return out;
}

namespace {

struct TaskDraw {
  LabeledPoints lp;
  Vec2 pivot;
};

TaskDraw draw_task(TaskKind kind, std::size_t n, std::uint64_t seed) {
  switch (kind) {
    case TaskKind::kMoons:
      return {gen_moons(n, 0.1, seed), {0.5, 0.25}};
    case TaskKind::kBlobs: {
      const Vec2 centers[] = {{0.0, 0.0}, {3.0, 3.0}};
      auto lp = gen_blobs(centers, 1.0, n / 2, seed);
      return {std::move(lp), {1.5, 1.5}};
    }
    case TaskKind::kGauss: {
      const Cov2 cov{0.5, 0.0, 0.5};
      const std::size_t n0 = n / 2;
      Tensor a = gen_gaussian2d({-1.0, -1.0}, cov, n0, seed);
      Tensor b = gen_gaussian2d({1.0, 1.0}, cov, n - n0, seed ^ 0x5bd1e995ull);
      LabeledPoints lp{Tensor(n, 2), Labels(n)};
      for (std::size_t i = 0; i < n; ++i) {
        const bool first = i < n0;
        const Tensor& src = first ? a : b;
        const std::size_t r = first ? i : i - n0;
        lp.points(i, 0) = src(r, 0);
        lp.points(i, 1) = src(r, 1);
        lp.labels[i] = first ? 0 : 1;
      }
      return {std::move(lp), {0.0, 0.0}};
    }
  }
  throw std::invalid_argument("unknown task kind");
}

std::string fmt_shift(const Shift& s) {
  std::ostringstream os;
  os << "angle_deg=" << s.angle_deg << " translation=(" << s.translation[0] << ","
     << s.translation[1] << ") scale=" << s.scale;
  return os.str();
}

// Independent target stream: the generator is re-seeded deterministically.
std::uint64_t target_seed(std::uint64_t seed) { return seed * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull; }

}  // namespace

DomainPair make_shifted_task(TaskKind kind, const Shift& shift, std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("make_shifted_task: n must be >= 2");
  // Validate before generating.
  shift.apply(Tensor(0, 2), {0.0, 0.0});
  TaskDraw src = draw_task(kind, n, seed);
  TaskDraw tgt = draw_task(kind, n, target_seed(seed));
  Tensor moved = shift.apply(tgt.lp.points, tgt.pivot);
  std::ostringstream prov;
  prov << "shifted_task kind=" << task_kind_name(kind) << " n=" << n << " seed=" << seed << " "
       << fmt_shift(shift);
  return DomainPair(std::move(src.lp.points), std::move(src.lp.labels), std::move(moved),
                    std::move(tgt.lp.labels), prov.str());
}

SyntheticPreset synthetic_preset_from_name(const std::string& name) {
  if (name == "gauss_same_cov") return SyntheticPreset::kGaussSameCov;
  if (name == "gauss_same_mean") return SyntheticPreset::kGaussSameMean;
  if (name == "moons") return SyntheticPreset::kMoons;
  if (name == "blobs") return SyntheticPreset::kBlobs;
  throw std::invalid_argument("unknown synthetic preset '" + name + "'");
}

std::string synthetic_preset_name(SyntheticPreset p) {
  switch (p) {
    case SyntheticPreset::kGaussSameCov: return "gauss_same_cov";
    case SyntheticPreset::kGaussSameMean: return "gauss_same_mean";
    case SyntheticPreset::kMoons: return "moons";
    case SyntheticPreset::kBlobs: return "blobs";
  }
  return "?";
}

DomainPair make_synthetic_preset(SyntheticPreset preset, std::size_t n, std::uint64_t seed) {
  const std::string name = synthetic_preset_name(preset);
  switch (preset) {
    case SyntheticPreset::kGaussSameCov: {
      const Cov2 cov{4.0, 2.0, 2.0};
      return DomainPair(gen_gaussian2d({5.0, 5.0}, cov, n, seed), std::nullopt,
                        gen_gaussian2d({1.0, 1.0}, cov, n, target_seed(seed)), std::nullopt,
                        name + " source=N((5,5),[[4,2],[2,2]]) target=N((1,1),[[4,2],[2,2]]) n=" +
                            std::to_string(n) + " seed=" + std::to_string(seed));
    }
    case SyntheticPreset::kGaussSameMean:
      return DomainPair(gen_gaussian2d({1.0, 1.0}, {0.3, 0.2, 0.2}, n, seed), std::nullopt,
                        gen_gaussian2d({1.0, 1.0}, {4.0, 2.0, 2.0}, n, target_seed(seed)),
                        std::nullopt,
                        name + " source=N((1,1),[[0.3,0.2],[0.2,0.2]]) target=N((1,1),[[4,2],[2,2]]) n=" +
                            std::to_string(n) + " seed=" + std::to_string(seed));
    case SyntheticPreset::kMoons:
    case SyntheticPreset::kBlobs: {
      LabeledPoints lp;
      std::string desc;
      if (preset == SyntheticPreset::kMoons) {
        lp = gen_moons(2 * n, 0.1, seed);
        desc = " source=upper half circle target=lower half circle noise_std=0.1";
      } else {
        const Vec2 centers[] = {{11.0, 11.0}, {9.0, 9.0}};
        lp = gen_blobs(centers, 1.0, n, seed);
        desc = " source=blob(11,11) target=blob(9,9) std=1";
      }
      std::vector<std::size_t> s_idx, t_idx;
      split_by_label(lp, 0, s_idx);
      split_by_label(lp, 1, t_idx);
      return DomainPair(lp.points.rows_subset(s_idx), std::nullopt, lp.points.rows_subset(t_idx),
                        std::nullopt,
                        name + desc + " n=" + std::to_string(n) + " seed=" + std::to_string(seed));
    }
  }
  throw std::invalid_argument("unknown synthetic preset");
}

Tensor AffineTransform::apply(const Tensor& points) const {
  Tensor out = points;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - offset[c]) * scale[c];
  return out;
}

Tensor AffineTransform::invert(const Tensor& points) const {
  Tensor out = points;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = out(r, c) / scale[c] + offset[c];
  return out;
}

Normalized affine_normalize(const Tensor& points, NormalizeMode mode) {
  if (points.rows() == 0) throw std::invalid_argument("affine_normalize: empty input");
  const std::size_t w = points.cols();
  AffineTransform tr{std::vector<double>(w, 0.0), std::vector<double>(w, 1.0)};
  switch (mode) {
    case NormalizeMode::kNone:
      break;
    case NormalizeMode::kShiftToNonneg:
      for (std::size_t c = 0; c < w; ++c) {
        double mn = points(0, c);
        for (std::size_t r = 1; r < points.rows(); ++r) mn = std::min(mn, points(r, c));
        tr.offset[c] = mn - kNonnegMargin;
      }
      break;
    case NormalizeMode::kStandardize:
      for (std::size_t c = 0; c < w; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < points.rows(); ++r) mean += points(r, c);
        mean /= static_cast<double>(points.rows());
        double var = 0.0;
        for (std::size_t r = 0; r < points.rows(); ++r)
          var += (points(r, c) - mean) * (points(r, c) - mean);
        var /= static_cast<double>(points.rows());
        tr.offset[c] = mean;
        tr.scale[c] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
      }
      break;
  }
  return {tr.apply(points), std::move(tr)};
}

void write_csv(const DomainPair& pair, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "x0,x1,label,domain\n";
  char buf[128];
  auto emit = [&](const Tensor& pts, const Labels* labels, const char* domain) {
    for (std::size_t i = 0; i < pts.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.9g,%.9g,", pts(i, 0), pts(i, 1));
      os << buf;
      if (labels) os << (*labels)[i];
      os << ',' << domain << '\n';
    }
  };
  emit(pair.source_points(), pair.has_source_labels() ? &pair.source_labels() : nullptr, "source");
  emit(pair.target_points(),
       pair.has_target_labels() ? &pair.target_labels_for_evaluation() : nullptr, "target");
}

DomainPair read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "x0,x1,label,domain")
    throw std::runtime_error(path.string() + ": bad header");
  std::vector<double> sv, tv;
  Labels sl, tl;
  bool s_lab = true, t_lab = true;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.emplace_back();
    if (f.size() != 4) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    const bool is_src = f[3] == "source";
    if (!is_src && f[3] != "target")
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": bad domain");
    auto& v = is_src ? sv : tv;
    v.push_back(std::stod(f[0]));
    v.push_back(std::stod(f[1]));
    auto& l = is_src ? sl : tl;
    bool& has = is_src ? s_lab : t_lab;
    if (f[2].empty()) has = false;
    else l.push_back(std::stoi(f[2]));
  }
  const std::size_t ns = sv.size() / 2, nt = tv.size() / 2;
  std::optional<Labels> src_l, tgt_l;
  if (s_lab && sl.size() == ns && ns > 0) src_l = std::move(sl);
  if (t_lab && tl.size() == nt && nt > 0) tgt_l = std::move(tl);
  return DomainPair(Tensor(ns, 2, std::move(sv)), std::move(src_l), Tensor(nt, 2, std::move(tv)),
                    std::move(tgt_l), "csv " + path.filename().string());
}

}  // namespace gla::data
