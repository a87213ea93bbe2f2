#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace timberlens {

// Error taxonomy. The CLI maps these onto its exit codes.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend Vec3 operator*(double s, Vec3 a) { return a * s; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) {
  const double n = norm(a);
  return n > 0.0 ? a * (1.0 / n) : a;
}

/// Axis-aligned box in COCO layout: top-left corner plus extent, pixels.
/// Pixel column i covers [i, i+1).
struct BBox {
  double x = 0.0, y = 0.0, w = 0.0, h = 0.0;

  double x2() const { return x + w; }
  double y2() const { return y + h; }
  double area() const { return w * h; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Pinhole intrinsics. Pixel centres sit on integer (u, v), so a W-wide
/// image has its optical centre at cx = (W - 1) / 2.
struct CameraIntrinsics {
  double fx = 700.0, fy = 700.0;
  double cx = 639.5, cy = 359.5;

  static CameraIntrinsics for_resolution(int width, int height) {
    const double scale = width / 1280.0;
    return {700.0 * scale, 700.0 * scale, (width - 1) / 2.0, (height - 1) / 2.0};
  }
  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

inline constexpr int kNumKeypoints = 5;
inline constexpr std::array<const char*, kNumKeypoints> kKeypointNames = {
    "felling_cut", "diameter_left", "diameter_right", "inclination_mid", "inclination_top"};

enum KeypointIndex : int {
  kFellingCut = 0,
  kDiameterLeft = 1,
  kDiameterRight = 2,
  kInclinationMid = 3,
  kInclinationTop = 4,
};

/// COCO visibility flags.
enum class KeypointFlag : int { kAbsent = 0, kOccluded = 1, kVisible = 2 };

struct Keypoint2D {
  double u = 0.0, v = 0.0;
  KeypointFlag flag = KeypointFlag::kAbsent;
  friend bool operator==(const Keypoint2D&, const Keypoint2D&) = default;
};

using KeypointSet = std::array<Keypoint2D, kNumKeypoints>;

inline constexpr double kPi = 3.14159265358979323846;
inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace timberlens
