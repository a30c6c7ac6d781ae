#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gla/tensor.hpp"

namespace gla::data {

using Vec2 = std::array<double, 2>;

/// Symmetric 2×2 covariance [[xx, xy], [xy, yy]].
struct Cov2 {
  double xx = 1.0;
  double xy = 0.0;
  double yy = 1.0;
};

using Labels = std::vector<int>;

struct LabeledPoints {
  Tensor points;  // N×2
  Labels labels;
};

class LeakageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// While alive on a thread, any read of held-out target labels on that thread
/// throws LeakageError. Training loops open one around every update step.
class TrainingScope {
 public:
  TrainingScope();
  ~TrainingScope();
  TrainingScope(const TrainingScope&) = delete;
  TrainingScope& operator=(const TrainingScope&) = delete;
  static bool active() noexcept;
};

/// What a training procedure may see: labeled source and unlabeled target.
struct TrainingView {
  const Tensor& source_points;
  const Labels* source_labels;  // null for alignment-only data
  const Tensor& target_points;
};

/// Source/target domain pair. Target labels are evaluation-only and can be
/// reached solely through target_labels_for_evaluation().
class DomainPair {
 public:
  DomainPair(Tensor source_points, std::optional<Labels> source_labels, Tensor target_points,
             std::optional<Labels> target_labels, std::string provenance);

  const Tensor& source_points() const noexcept { return source_points_; }
  const Tensor& target_points() const noexcept { return target_points_; }
  bool has_source_labels() const noexcept { return source_labels_.has_value(); }
  bool has_target_labels() const noexcept { return target_labels_.has_value(); }
  const Labels& source_labels() const;
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

  TrainingView training_view() const {
    return {source_points_, source_labels_ ? &*source_labels_ : nullptr, target_points_};
  }

  /// Held-out labels. Throws LeakageError inside a TrainingScope.
  const Labels& target_labels_for_evaluation() const;

 private:
  Tensor source_points_;
  std::optional<Labels> source_labels_;
  Tensor target_points_;
  std::optional<Labels> target_labels_;
  std::string provenance_;
  std::size_t num_classes_ = 0;
};

Tensor gen_gaussian2d(Vec2 mean, Cov2 cov, std::size_t n, std::uint64_t seed);

/// Two interleaving half circles: label 0 on (cos t, sin t), label 1 on
/// (1 − cos t, 0.5 − sin t), t on a uniform grid over [0, π]; the first
/// n/2 points (rounded down) form label 0.
LabeledPoints gen_moons(std::size_t n, double noise_std, std::uint64_t seed);

LabeledPoints gen_blobs(std::span<const Vec2> centers, double std, std::size_t n_per_center,
                        std::uint64_t seed);

enum class TaskKind { kGauss, kMoons, kBlobs };
TaskKind task_kind_from_name(const std::string& name);
std::string task_kind_name(TaskKind k);

/// Rotation (degrees, about `pivot`), then uniform scale, then translation.
struct Shift {
  double angle_deg = 0.0;
  Vec2 translation{0.0, 0.0};
  double scale = 1.0;
  std::optional<Vec2> pivot;  // defaults to the generator's nominal center

  Tensor apply(const Tensor& points, Vec2 default_pivot) const;
};

/// Labeled domain-shift classification task with `n` points per domain.
/// Source and target are drawn from independent streams of `seed`; the
/// target is then moved by `shift`.
DomainPair make_shifted_task(TaskKind kind, const Shift& shift, std::size_t n, std::uint64_t seed);

/// The four two-domain alignment setups used to check distribution alignment.
enum class SyntheticPreset { kGaussSameCov, kGaussSameMean, kMoons, kBlobs };
SyntheticPreset synthetic_preset_from_name(const std::string& name);
std::string synthetic_preset_name(SyntheticPreset p);
DomainPair make_synthetic_preset(SyntheticPreset preset, std::size_t n_per_domain,
                                 std::uint64_t seed);

enum class NormalizeMode { kNone, kShiftToNonneg, kStandardize };

/// Per-column affine map x ↦ (x − offset) · scale.
struct AffineTransform {
  std::vector<double> offset;
  std::vector<double> scale;

  Tensor apply(const Tensor& points) const;
  Tensor invert(const Tensor& points) const;
};

struct Normalized {
  Tensor points;
  AffineTransform transform;
};

inline constexpr double kNonnegMargin = 0.1;

Normalized affine_normalize(const Tensor& points, NormalizeMode mode);

/// CSV with header `x0,x1,label,domain`; 9 significant digits; an empty
/// label field means unlabeled.
void write_csv(const DomainPair& pair, const std::filesystem::path& path);
DomainPair read_csv(const std::filesystem::path& path);

}  // namespace gla::data
