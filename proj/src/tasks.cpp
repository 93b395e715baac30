#include "tdmcl/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tdmcl/binary_io.hpp"
#include "tdmcl/rng.hpp"

namespace tdmcl {

std::string to_string(Family f) {
  switch (f) {
    case Family::kPerception: return "perception";
    case Family::kMotor: return "motor";
    case Family::kInteraction: return "interaction";
  }
  return "?";
}

std::string to_string(OutputKind k) {
  switch (k) {
    case OutputKind::kClassLogits: return "class_logits";
    case OutputKind::kActionVector: return "action_vector";
    case OutputKind::kCommandSequence: return "command_sequence";
  }
  return "?";
}

std::string to_string(MetricKind m) {
  switch (m) {
    case MetricKind::kAccuracy: return "accuracy";
    case MetricKind::kNegativeMse: return "negative_mse";
    case MetricKind::kSuccessRate: return "success_rate";
  }
  return "?";
}

void validate(const SuiteConfig& cfg) {
  if (cfg.train_size < 1) throw ConfigError("suite.train_size must be >= 1");
  if (cfg.val_size < 1) throw ConfigError("suite.val_size must be >= 1");
  if (cfg.test_size < 1) throw ConfigError("suite.test_size must be >= 1");
  if (!(cfg.overlap >= 0.0 && cfg.overlap <= 1.0))
    throw ConfigError("suite.overlap must lie in [0, 1]");
  if (!(cfg.command_tolerance > 0.0)) throw ConfigError("suite.command_tolerance must be > 0");
}

namespace {

constexpr int kClasses = 5;
constexpr int kSide = 16;
constexpr int kChannels = 3;
constexpr int kSupersample = 3;

// Two-link arm anchored just below the bottom edge.
constexpr double kBaseX = 8.0;
constexpr double kBaseY = 17.0;
constexpr double kLink = 9.0;
constexpr double kCells[3] = {4.0, 8.0, 12.0};

enum class Style { kOutline, kFilled, kTextured };

using Glyph = std::array<std::uint8_t, 25>;

struct Object {
  int cls = 0;
  bool shared = true;
  double cx = 8, cy = 8, radius = 3, angle = 0;
  std::array<double, 3> color{1, 1, 1};
  Style style = Style::kFilled;
};

bool inside_shape(int cls, double u, double v) {
  switch (cls) {
    case 0: return u * u + v * v <= 1.0;
    case 1: return std::max(std::abs(u), std::abs(v)) <= 0.8;
    case 2: return v <= 0.5 && v >= 1.732 * std::abs(u) - 1.0;
    case 3:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 0.95) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 0.95);
    default: return u * u + v * v / 0.16 <= 1.0;
  }
}

bool inside_glyph(const Glyph& g, double u, double v) {
  if (std::abs(u) >= 1.0 || std::abs(v) >= 1.0) return false;
  const int gx = std::min(4, static_cast<int>((u + 1.0) * 2.5));
  const int gy = std::min(4, static_cast<int>((v + 1.0) * 2.5));
  return g[gy * 5 + gx] != 0;
}

struct Canvas {
  // (y, x, c) order, matching the Split column layout.
  std::array<float, kSide * kSide * kChannels> px{};

  float& at(int y, int x, int c) { return px[(y * kSide + x) * kChannels + c]; }

  void fill(const std::array<double, 3>& rgb) {
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x)
        for (int c = 0; c < kChannels; ++c) at(y, x, c) = static_cast<float>(rgb[c]);
  }

  template <typename Coverage, typename Color>
  void paint(Coverage coverage, Color color) {
    for (int y = 0; y < kSide; ++y)
      for (int x = 0; x < kSide; ++x) {
        int hits = 0;
        double sx = 0, sy = 0;
        for (int j = 0; j < kSupersample; ++j)
          for (int i = 0; i < kSupersample; ++i) {
            const double px_x = x + (i + 0.5) / kSupersample;
            const double px_y = y + (j + 0.5) / kSupersample;
            if (coverage(px_x, px_y)) {
              ++hits;
              sx += px_x;
              sy += px_y;
            }
          }
        if (hits == 0) continue;
        const double a = static_cast<double>(hits) / (kSupersample * kSupersample);
        const std::array<double, 3> rgb = color(sx / hits, sy / hits);
        for (int c = 0; c < kChannels; ++c)
          at(y, x, c) = static_cast<float>((1.0 - a) * at(y, x, c) + a * rgb[c]);
      }
  }
};

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = ax + t * dx - px, ey = ay + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

// Joint angles reaching (x, y) in image coordinates (y grows downward).
std::array<double, 2> inverse_kinematics(double x, double y) {
  const double dx = x - kBaseX, up = kBaseY - y;
  const double d2 = dx * dx + up * up;
  const double c2 = std::clamp((d2 - 2 * kLink * kLink) / (2 * kLink * kLink), -1.0, 1.0);
  const double t2 = std::acos(c2);
  const double t1 = std::atan2(up, dx) - std::atan2(kLink * std::sin(t2), kLink + kLink * c2);
  return {t1, t2};
}

struct JointRange {
  double lo[2], hi[2];
};

// Joint ranges over the whole canvas, used to map angles onto [0.1, 0.9].
const JointRange& joint_range() {
  static const JointRange range = [] {
    JointRange r{{1e9, 1e9}, {-1e9, -1e9}};
    for (int j = 0; j <= 64; ++j)
      for (int i = 0; i <= 64; ++i) {
        const auto a = inverse_kinematics(1.0 + 14.0 * i / 64.0, 1.0 + 14.0 * j / 64.0);
        for (int k = 0; k < 2; ++k) {
          r.lo[k] = std::min(r.lo[k], a[k]);
          r.hi[k] = std::max(r.hi[k], a[k]);
        }
      }
    return r;
  }();
  return range;
}

double normalize_joint(int k, double angle) {
  const auto& r = joint_range();
  return 0.1 + 0.8 * (angle - r.lo[k]) / (r.hi[k] - r.lo[k]);
}

double denormalize_joint(int k, double value) {
  const auto& r = joint_range();
  return r.lo[k] + (value - 0.1) / 0.8 * (r.hi[k] - r.lo[k]);
}

std::array<double, 2> normalized_ik(double x, double y) {
  const auto a = inverse_kinematics(x, y);
  return {normalize_joint(0, a[0]), normalize_joint(1, a[1])};
}

class Renderer {
 public:
  Renderer(const TaskSpec& spec, std::uint64_t seed) {
    Rng rng = Rng::derive(seed, 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(spec.task_id));
    for (auto& g : glyphs_) {
      do {
        for (auto& cell : g) cell = rng.uniform() < 0.5 ? 1 : 0;
      } while (std::accumulate(g.begin(), g.end(), 0) < 8);
    }
    perm_.resize(kSide * kSide);
    std::iota(perm_.begin(), perm_.end(), 0);
    const int moved = static_cast<int>(std::lround((1.0 - spec.overlap.strength) * kSide * kSide));
    if (spec.task_id > 1 && moved > 1) {
      std::vector<int> all(kSide * kSide);
      std::iota(all.begin(), all.end(), 0);
      for (int i = static_cast<int>(all.size()) - 1; i > 0; --i)
        std::swap(all[i], all[rng.below(i + 1)]);
      std::vector<int> chosen(all.begin(), all.begin() + moved);
      std::vector<int> shuffled = chosen;
      for (int i = moved - 1; i > 0; --i) std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
      for (int i = 0; i < moved; ++i) perm_[chosen[i]] = shuffled[i];
    }
  }

  void object(Canvas& cv, const Object& o, Rng& rng) const {
    const double ca = std::cos(o.angle), sa = std::sin(o.angle);
    auto local = [&](double x, double y, double scale) {
      const double dx = (x - o.cx) / (o.radius * scale), dy = (y - o.cy) / (o.radius * scale);
      return std::array<double, 2>{ca * dx + sa * dy, -sa * dx + ca * dy};
    };
    auto in = [&](double x, double y, double scale) {
      const auto uv = local(x, y, scale);
      return o.shared ? inside_shape(o.cls, uv[0], uv[1])
                      : inside_glyph(glyphs_[o.cls], uv[0], uv[1]);
    };
    const double inner = std::max(0.2, (o.radius - 1.3) / o.radius);
    const double phase = rng.uniform(0.0, 2 * M_PI);
    cv.paint(
        [&](double x, double y) {
          if (!in(x, y, 1.0)) return false;
          return o.style != Style::kOutline || !in(x, y, inner);
        },
        [&](double x, double y) {
          if (o.style != Style::kTextured) return o.color;
          const auto uv = local(x, y, 1.0);
          const double m = 0.75 + 0.25 * std::sin(uv[0] * 4.0 + uv[1] * 2.0 + phase);
          return std::array<double, 3>{o.color[0] * m, o.color[1] * m, o.color[2] * m};
        });
  }

  static void segment(Canvas& cv, double ax, double ay, double bx, double by, double width,
                      std::array<double, 3> rgb) {
    cv.paint([&](double x, double y) { return segment_distance(x, y, ax, ay, bx, by) <= width; },
             [&](double, double) { return rgb; });
  }

  static void arm(Canvas& cv, double t1, double t2) {
    const double ex = kBaseX + kLink * std::cos(t1), ey = kBaseY - kLink * std::sin(t1);
    const double hx = ex + kLink * std::cos(t1 + t2), hy = ey - kLink * std::sin(t1 + t2);
    segment(cv, kBaseX, kBaseY, ex, ey, 0.45, {0.55, 0.55, 0.55});
    segment(cv, ex, ey, hx, hy, 0.45, {0.55, 0.55, 0.55});
  }

  // Writes the finished canvas into a column, applying the task permutation.
  void emit(const Canvas& cv, Eigen::Ref<VectorF> out) const {
    for (int p = 0; p < kSide * kSide; ++p)
      for (int c = 0; c < kChannels; ++c)
        out(perm_[p] * kChannels + c) = cv.px[p * kChannels + c];
  }

 private:
  std::array<Glyph, kClasses> glyphs_{};
  std::vector<int> perm_;
};

Style style_for(const TaskSpec& spec, Rng& rng) {
  switch (spec.task_id) {
    case 1: return Style::kOutline;
    case 2: return Style::kFilled;
    case 3: return Style::kTextured;
    default: return static_cast<Style>(rng.below(3));
  }
}

Object draw_object(const TaskSpec& spec, Rng& rng, double jitter, double rmin, double rmax,
                   int cell_x, int cell_y) {
  Object o;
  o.cls = static_cast<int>(rng.below(kClasses));
  o.shared = spec.task_id == 1 || rng.uniform() < spec.overlap.strength;
  o.cx = kCells[cell_x] + rng.uniform(-jitter, jitter);
  o.cy = kCells[cell_y] + rng.uniform(-jitter, jitter);
  o.radius = rng.uniform(rmin, rmax);
  o.angle = rng.uniform(-0.3, 0.3);
  for (auto& c : o.color) c = rng.uniform(0.45, 1.0);
  o.style = style_for(spec, rng);
  return o;
}

void background(Canvas& cv, Rng& rng) {
  std::array<double, 3> bg;
  for (auto& c : bg) c = rng.uniform(0.0, 0.25);
  cv.fill(bg);
}

void add_noise(Canvas& cv, Rng& rng, double sigma) {
  for (auto& v : cv.px)
    v = static_cast<float>(std::clamp(static_cast<double>(v) + sigma * rng.normal(), 0.0, 1.0));
}

void make_sample(const TaskSpec& spec, const Renderer& r, Rng& rng, Split& split, Index col) {
  Canvas cv;
  background(cv, rng);
  const int gx = static_cast<int>(rng.below(3)), gy = static_cast<int>(rng.below(3));
  switch (spec.family) {
    case Family::kPerception: {
      const Object o = draw_object(spec, rng, 1.5, 3.0, 4.5, gx, gy);
      r.object(cv, o, rng);
      if (o.style == Style::kTextured) add_noise(cv, rng, 0.06);
      split.labels[col] = o.cls;
      break;
    }
    case Family::kMotor: {
      const double rest1 = rng.uniform(0.2, 0.8), rest2 = rng.uniform(0.2, 0.8);
      Renderer::arm(cv, denormalize_joint(0, rest1), denormalize_joint(1, rest2));
      const Object o = draw_object(spec, rng, 2.0, 2.5, 3.5, gx, gy);
      double pole = 0.0;
      if (spec.task_id == 5) {
        pole = rng.uniform(-0.6, 0.6);
        Renderer::segment(cv, 8.0, 15.5, 8.0 + 8.0 * std::sin(pole), 15.5 - 8.0 * std::cos(pole),
                          0.6, {0.95, 0.95, 0.95});
      }
      r.object(cv, o, rng);
      if (o.style == Style::kTextured) add_noise(cv, rng, 0.06);
      const auto q = normalized_ik(o.cx, o.cy);
      auto t = split.targets.col(col);
      t(0) = static_cast<float>(q[0]);
      t(1) = static_cast<float>(q[1]);
      if (spec.task_id == 5) t(2) = static_cast<float>(0.5 + pole / 1.2);
      if (spec.task_id == 6) {
        t(2) = static_cast<float>(0.1 + 0.2 * o.cls);
        t(3) = static_cast<float>(0.1 + 0.8 * (o.radius - 2.5));
      }
      break;
    }
    case Family::kInteraction: {
      const double s1 = rng.uniform(0.15, 0.85), s2 = rng.uniform(0.15, 0.85);
      Renderer::arm(cv, denormalize_joint(0, s1), denormalize_joint(1, s2));
      const Object o = draw_object(spec, rng, 0.5, 2.5, 3.5, gx, gy);
      r.object(cv, o, rng);
      if (o.style == Style::kTextured) add_noise(cv, rng, 0.06);
      double goal_x = kCells[gx], goal_y = kCells[gy];
      if (spec.task_id == 8) {
        static constexpr double kOffsets[kClasses][2] = {{0, -3}, {3, 0}, {0, 3}, {-3, 0}, {0, 0}};
        goal_x += kOffsets[o.cls][0];
        goal_y += kOffsets[o.cls][1];
      } else if (spec.task_id == 9 && o.cls % 2 == 1) {
        goal_x = 16.0 - goal_x;
        goal_y = 16.0 - goal_y;
      }
      const auto g = normalized_ik(goal_x, goal_y);
      split.states(0, col) = static_cast<float>(s1);
      split.states(1, col) = static_cast<float>(s2);
      auto t = split.targets.col(col);
      for (int l = 0; l < spec.horizon; ++l) {
        const double f = (l + 1.0) / spec.horizon;
        t(2 * l) = static_cast<float>(s1 + f * (g[0] - s1));
        t(2 * l + 1) = static_cast<float>(s2 + f * (g[1] - s2));
      }
      break;
    }
  }
  r.emit(cv, split.inputs.col(col));
}

Split make_split(const TaskSpec& spec, const Renderer& r, Rng rng, int n) {
  Split s;
  s.inputs.resize(spec.input_size(), n);
  s.states.resize(spec.state_dim, n);
  if (spec.output_kind == OutputKind::kClassLogits) s.labels.assign(n, 0);
  s.targets.resize(spec.target_dim(), n);
  for (int i = 0; i < n; ++i) make_sample(spec, r, rng, s, i);
  return s;
}

}  // namespace

std::vector<TaskSpec> default_specs(double overlap) {
  std::vector<TaskSpec> specs;
  const char* names[9] = {"shapes-outline", "shapes-filled", "shapes-textured",
                          "reach",          "pole-reach",    "grasp",
                          "drawer-open",    "hammer",        "button-press"};
  const int action_dims[3] = {2, 3, 4};
  for (int t = 1; t <= 9; ++t) {
    TaskSpec s;
    s.task_id = t;
    s.name = names[t - 1];
    s.channels = kChannels;
    s.height = s.width = kSide;
    for (int k = 1; k < t; ++k) s.overlap.shared_with.push_back(k);
    s.overlap.strength = t == 1 ? 1.0 : overlap;
    if (t <= 3) {
      s.family = Family::kPerception;
      s.output_kind = OutputKind::kClassLogits;
      s.num_classes = kClasses;
      s.metric = MetricKind::kAccuracy;
    } else if (t <= 6) {
      s.family = Family::kMotor;
      s.output_kind = OutputKind::kActionVector;
      s.action_dim = action_dims[t - 4];
      s.metric = MetricKind::kNegativeMse;
    } else {
      s.family = Family::kInteraction;
      s.output_kind = OutputKind::kCommandSequence;
      s.state_dim = 2;
      s.action_dim = 2;
      s.horizon = 4;
      s.metric = MetricKind::kSuccessRate;
    }
    specs.push_back(std::move(s));
  }
  return specs;
}

Dataset generate_task(const TaskSpec& spec, const SuiteConfig& cfg) {
  validate(cfg);
  Dataset d;
  d.spec = spec;
  d.generator_seed = cfg.seed;
  const Renderer renderer(spec, cfg.seed);
  const std::uint64_t salt = static_cast<std::uint64_t>(spec.task_id) << 8;
  d.train = make_split(spec, renderer, Rng::derive(cfg.seed, salt | 1), cfg.train_size);
  d.val = make_split(spec, renderer, Rng::derive(cfg.seed, salt | 2), cfg.val_size);
  d.test = make_split(spec, renderer, Rng::derive(cfg.seed, salt | 3), cfg.test_size);
  return d;
}

std::vector<Dataset> generate_suite(const SuiteConfig& cfg) {
  validate(cfg);
  std::vector<Dataset> suite;
  for (const TaskSpec& s : default_specs(cfg.overlap)) suite.push_back(generate_task(s, cfg));
  return suite;
}

bool GoalChecker::accepts(const Eigen::Ref<const VectorF>& predicted,
                          const Eigen::Ref<const VectorF>& scripted) const {
  if (predicted.size() != scripted.size()) return false;
  for (Index i = 0; i < predicted.size(); ++i) {
    if (!(std::abs(static_cast<double>(predicted(i)) - scripted(i)) <= tolerance)) return false;
  }
  return true;
}

double success_rate(const MatrixF& predicted, const MatrixF& scripted, const GoalChecker& checker) {
  if (predicted.cols() == 0) return 0.0;
  Index ok = 0;
  for (Index i = 0; i < predicted.cols(); ++i)
    if (checker.accepts(predicted.col(i), scripted.col(i))) ++ok;
  return static_cast<double>(ok) / static_cast<double>(predicted.cols());
}

double accuracy(const MatrixF& logits, const std::vector<int>& labels) {
  if (logits.cols() == 0) return 0.0;
  Index ok = 0;
  for (Index i = 0; i < logits.cols(); ++i) {
    Index best;
    logits.col(i).maxCoeff(&best);
    if (best == labels[i]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(logits.cols());
}

double regression_mse(const MatrixF& predicted, const MatrixF& targets) {
  if (predicted.size() == 0) return 0.0;
  return (predicted - targets).cast<double>().squaredNorm() / static_cast<double>(predicted.size());
}

double metric_points(const TaskSpec& spec, const MatrixF& outputs, const Split& split,
                     double command_tolerance) {
  switch (spec.metric) {
    case MetricKind::kAccuracy: return 100.0 * accuracy(outputs, split.labels);
    case MetricKind::kNegativeMse: {
      // Scaled so the split's own target variance (a constant predictor at the
      // split mean) sits at -100 and a perfect fit at 0.
      const MatrixD centered =
          split.targets.cast<double>().colwise() - split.targets.cast<double>().rowwise().mean();
      const double variance = centered.size() ? centered.squaredNorm() / centered.size() : 0.0;
      const double mse = regression_mse(outputs, split.targets);
      return variance > 0.0 ? -100.0 * mse / variance : -100.0 * mse;
    }
    case MetricKind::kSuccessRate:
      return 100.0 * success_rate(outputs, split.targets, GoalChecker{command_tolerance});
  }
  return 0.0;
}

double chance_points(const TaskSpec& spec, const Split& train, const Split& test,
                     double command_tolerance) {
  MatrixF constant;
  if (spec.output_kind == OutputKind::kClassLogits) {
    std::vector<int> counts(spec.num_classes, 0);
    for (int l : train.labels) ++counts[l];
    const int best = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    constant = MatrixF::Zero(spec.num_classes, test.size());
    constant.row(best).setOnes();
  } else {
    const VectorF mean = train.targets.rowwise().mean();
    constant = mean.replicate(1, test.size());
  }
  return metric_points(spec, constant, test, command_tolerance);
}

// Container layout, all little-endian: "TDMD1", task header, then per split:
// sample count, input shape header (height, width, channels), row-major
// float32 inputs (sample, y, x, channel), state block, targets block. The file
// ends with an FNV-1a checksum of all preceding bytes.
namespace {

constexpr std::string_view kDatasetMagic = "TDMD1";

void encode_split(ByteWriter& w, const TaskSpec& spec, const Split& s) {
  w.u64(static_cast<std::uint64_t>(s.size()));
  w.u32(spec.height);
  w.u32(spec.width);
  w.u32(spec.channels);
  w.matrix_f32(s.inputs.transpose());
  w.u32(static_cast<std::uint32_t>(s.states.rows()));
  w.matrix_f32(s.states.transpose());
  if (spec.output_kind == OutputKind::kClassLogits) {
    w.u32(0);
    for (int l : s.labels) w.i32(l);
  } else {
    w.u32(static_cast<std::uint32_t>(s.targets.rows()));
    w.matrix_f32(s.targets.transpose());
  }
}

Split decode_split(ByteReader& r, const TaskSpec& spec) {
  Split s;
  const std::uint64_t n = r.u64();
  const std::uint32_t h = r.u32(), wd = r.u32(), c = r.u32();
  if (static_cast<int>(h) != spec.height || static_cast<int>(wd) != spec.width ||
      static_cast<int>(c) != spec.channels)
    r.fail("split shape header disagrees with task header");
  const Index size = static_cast<Index>(h) * wd * c;
  if (n > r.remaining() / 4) r.fail("sample count exceeds file size");
  const Index count = static_cast<Index>(n);
  s.inputs = r.matrix_f32(count, size).transpose();
  const std::uint32_t sd = r.u32();
  if (static_cast<int>(sd) != spec.state_dim) r.fail("state dimension disagrees with task header");
  s.states = r.matrix_f32(count, sd).transpose();
  const std::uint32_t td = r.u32();
  if (static_cast<int>(td) != spec.target_dim()) r.fail("target dimension disagrees with task header");
  if (td == 0) {
    s.labels.resize(count);
    for (auto& l : s.labels) {
      l = r.i32();
      if (l < 0 || l >= spec.num_classes) r.fail("label out of range");
    }
    s.targets.resize(0, count);
  } else {
    s.targets = r.matrix_f32(count, td).transpose();
  }
  return s;
}

}  // namespace

std::string encode_dataset(const Dataset& d) {
  ByteWriter w;
  w.bytes(kDatasetMagic);
  const TaskSpec& s = d.spec;
  w.u32(s.task_id);
  w.u32(static_cast<std::uint32_t>(s.family));
  w.str(s.name);
  w.u32(s.channels);
  w.u32(s.height);
  w.u32(s.width);
  w.u32(s.state_dim);
  w.u32(static_cast<std::uint32_t>(s.output_kind));
  w.u32(s.num_classes);
  w.u32(s.action_dim);
  w.u32(s.horizon);
  w.u32(static_cast<std::uint32_t>(s.metric));
  w.u32(static_cast<std::uint32_t>(s.overlap.shared_with.size()));
  for (int k : s.overlap.shared_with) w.u32(k);
  w.f64(s.overlap.strength);
  w.u64(d.generator_seed);
  w.u32(3);
  encode_split(w, s, d.train);
  encode_split(w, s, d.val);
  encode_split(w, s, d.test);
  seal(w);
  return std::move(w.data());
}

Dataset decode_dataset(std::string_view bytes, const std::string& what) {
  ByteReader r(unseal(bytes, kDatasetMagic, what), what);
  Dataset d;
  TaskSpec& s = d.spec;
  s.task_id = static_cast<int>(r.u32());
  const std::uint32_t fam = r.u32();
  if (fam > 2) r.fail("unknown task family");
  s.family = static_cast<Family>(fam);
  s.name = r.str();
  s.channels = static_cast<int>(r.u32());
  s.height = static_cast<int>(r.u32());
  s.width = static_cast<int>(r.u32());
  s.state_dim = static_cast<int>(r.u32());
  const std::uint32_t kind = r.u32();
  if (kind > 2) r.fail("unknown output kind");
  s.output_kind = static_cast<OutputKind>(kind);
  s.num_classes = static_cast<int>(r.u32());
  s.action_dim = static_cast<int>(r.u32());
  s.horizon = static_cast<int>(r.u32());
  const std::uint32_t metric = r.u32();
  if (metric > 2) r.fail("unknown metric");
  s.metric = static_cast<MetricKind>(metric);
  const std::uint32_t shared = r.u32();
  if (shared > 64) r.fail("implausible overlap list");
  for (std::uint32_t i = 0; i < shared; ++i) s.overlap.shared_with.push_back(static_cast<int>(r.u32()));
  s.overlap.strength = r.f64();
  d.generator_seed = r.u64();
  if (r.u32() != 3) r.fail("expected three splits (train, val, test)");
  d.train = decode_split(r, s);
  d.val = decode_split(r, s);
  d.test = decode_split(r, s);
  if (r.remaining() != 0) r.fail("trailing bytes after last split");
  return d;
}

void write_dataset(const std::string& path, const Dataset& d) {
  write_file_atomic(path, encode_dataset(d));
}

Dataset read_dataset(const std::string& path) {
  const std::string bytes = read_file(path);
  return decode_dataset(bytes, path);
}

std::uint64_t dataset_digest(const Dataset& d) { return fnv1a64(encode_dataset(d)); }

std::string suite_manifest_csv(const std::vector<Dataset>& suite, const SuiteConfig& cfg,
                               const std::vector<double>& learned) {
  std::ostringstream os;
  os << "task_id,family,name,input_shape,state_dim,output_shape,metric,overlap,"
        "chance_score,baseline_score,train_size,val_size,test_size\n";
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const TaskSpec& s = suite[i].spec;
    std::string out_shape;
    if (s.output_kind == OutputKind::kClassLogits) out_shape = "K=" + std::to_string(s.num_classes);
    else if (s.output_kind == OutputKind::kActionVector) out_shape = "D=" + std::to_string(s.action_dim);
    else out_shape = "L=" + std::to_string(s.horizon) + "xD=" + std::to_string(s.action_dim);
    os << s.task_id << ',' << to_string(s.family) << ',' << s.name << ',' << s.channels << 'x'
       << s.height << 'x' << s.width << ',' << s.state_dim << ',' << out_shape << ','
       << to_string(s.metric) << ',' << s.overlap.strength << ','
       << chance_points(s, suite[i].train, suite[i].test, cfg.command_tolerance) << ',';
    if (i < learned.size()) os << learned[i];
    os << ',' << suite[i].train.size() << ',' << suite[i].val.size() << ','
       << suite[i].test.size() << '\n';
  }
  return os.str();
}

}  // namespace tdmcl
