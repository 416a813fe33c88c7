#include <algorithm>
#include <cmath>
#include <map>

#include "smal/geometry/lbs.hpp"
#include "smal/geometry/rotations.hpp"
#include "smal/synth/synth.hpp"

namespace smal {

namespace {

Vec3 reflect_x(const Vec3& v) { return Vec3(-v.x(), v.y(), v.z()); }

// (cos, sin) table with exact mirror symmetry: entry n-k is entry k with the
// sine negated, and the half-turn entry is exactly (-1, 0).
std::vector<Vec2> circle_table(int n) {
  std::vector<Vec2> t(n);
  for (int k = 0; k <= n / 2; ++k) {
    if (2 * k == n) {
      t[k] = Vec2(-1.0, 0.0);
    } else {
      const double a = 2.0 * M_PI * k / n;
      t[k] = Vec2(std::cos(a), std::sin(a));
    }
  }
  for (int k = n / 2 + 1; k < n; ++k) t[k] = Vec2(t[n - k].x(), -t[n - k].y());
  return t;
}

struct RingFrame {
  Vec3 u, w;
};

RingFrame ring_frame(const Vec3& axis, const Vec3& hint) {
  const Vec3 d = axis.normalized();
  Vec3 u = hint - d * d.dot(hint);
  if (u.norm() < 1e-9) u = Vec3::UnitY() - d * d.dot(Vec3::UnitY());
  u.normalize();
  return {u, d.cross(u)};
}

struct Draft {
  std::string name;
  int parent = -1;
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::array<int, 2>> welds;  // (local vertex, parent local vertex)
};

struct Socket {
  std::vector<int> ring;
  int center = -1;
  int face_begin = 0;
  int face_end = 0;
};

class Builder {
 public:
  std::vector<Draft> drafts;

  int add_part(const std::string& name, int parent) {
    Draft d;
    d.name = name;
    d.parent = parent;
    drafts.push_back(std::move(d));
    return static_cast<int>(drafts.size()) - 1;
  }

  int add_vertex(int part, const Vec3& p) {
    drafts[part].vertices.push_back(p);
    return static_cast<int>(drafts[part].vertices.size()) - 1;
  }

  std::vector<int> add_ring(int part, const Vec3& center, const Vec3& axis,
                            const Vec3& hint, double radius, int segments) {
    const RingFrame f = ring_frame(axis, hint);
    const auto table = circle_table(segments);
    std::vector<int> ids(segments);
    for (int k = 0; k < segments; ++k)
      ids[k] = add_vertex(
          part, center + radius * (table[k].x() * f.u + table[k].y() * f.w));
    return ids;
  }

  /// Child copies of a parent ring; positions are bitwise identical so the
  /// interface duplicates coincide exactly.
  std::vector<int> weld_ring(int part, const std::vector<int>& parent_ring) {
    Draft& d = drafts[part];
    const Draft& pd = drafts[d.parent];
    std::vector<int> ids(parent_ring.size());
    for (size_t k = 0; k < parent_ring.size(); ++k) {
      ids[k] = add_vertex(part, pd.vertices[parent_ring[k]]);
      d.welds.push_back({ids[k], parent_ring[k]});
    }
    return ids;
  }

  /// Quad strip between equal-sized rings. The correspondence (direction and
  /// offset) minimizes total edge length, and the winding is fixed so that
  /// normals point away from the ring axis.
  void connect(int part, const std::vector<int>& ring_a,
               const std::vector<int>& ring_b) {
    Draft& d = drafts[part];
    const int n = static_cast<int>(ring_a.size());
    if (static_cast<int>(ring_b.size()) != n)
      throw validation_error("connect: ring sizes differ");
    auto pos = [&](int v) { return d.vertices[v]; };

    int best_offset = 0, best_dir = 1;
    double best_len = std::numeric_limits<double>::infinity();
    for (int dir : {1, -1}) {
      for (int off = 0; off < n; ++off) {
        double len = 0;
        for (int k = 0; k < n; ++k) {
          const int m = ((dir * k + off) % n + n) % n;
          len += (pos(ring_a[k]) - pos(ring_b[m])).squaredNorm();
        }
        if (len < best_len - 1e-15) {
          best_len = len;
          best_offset = off;
          best_dir = dir;
        }
      }
    }
    auto match = [&](int k) {
      return ring_b[((best_dir * k + best_offset) % n + n) % n];
    };

    const int face_begin = static_cast<int>(d.faces.size());
    for (int k = 0; k < n; ++k) {
      const int k1 = (k + 1) % n;
      d.faces.push_back({ring_a[k], ring_a[k1], match(k1)});
      d.faces.push_back({ring_a[k], match(k1), match(k)});
    }

    // Orient outward relative to the segment between ring centers.
    Vec3 ca = Vec3::Zero(), cb = Vec3::Zero();
    for (int v : ring_a) ca += pos(v);
    for (int v : ring_b) cb += pos(v);
    ca /= n;
    cb /= n;
    double align = 0;
    for (int fi = face_begin; fi < static_cast<int>(d.faces.size()); ++fi) {
      const Face& f = d.faces[fi];
      const Vec3 centroid = (pos(f[0]) + pos(f[1]) + pos(f[2])) / 3.0;
      const Vec3 normal =
          (pos(f[1]) - pos(f[0])).cross(pos(f[2]) - pos(f[0]));
      const Vec3 axis = (cb - ca).normalized();
      const Vec3 mid = 0.5 * (ca + cb);
      Vec3 radial = centroid - (mid + axis * axis.dot(centroid - mid));
      align += normal.dot(radial);
    }
    if (align < 0)
      for (int fi = face_begin; fi < static_cast<int>(d.faces.size()); ++fi)
        std::swap(d.faces[fi][1], d.faces[fi][2]);
  }

  /// Fan cap over a ring. `normal_direction` fixes the side the cap faces.
  int add_cap(int part, const std::vector<int>& ring, const Vec3& center,
              const Vec3& normal_direction) {
    Draft& d = drafts[part];
    const int c = add_vertex(part, center);
    const int n = static_cast<int>(ring.size());
    const int face_begin = static_cast<int>(d.faces.size());
    for (int k = 0; k < n; ++k)
      d.faces.push_back({ring[k], ring[(k + 1) % n], c});
    const Face& f0 = d.faces[face_begin];
    const Vec3 normal = (d.vertices[f0[1]] - d.vertices[f0[0]])
                            .cross(d.vertices[f0[2]] - d.vertices[f0[0]]);
    if (normal.dot(normal_direction) < 0)
      for (int fi = face_begin; fi < static_cast<int>(d.faces.size()); ++fi)
        std::swap(d.faces[fi][1], d.faces[fi][2]);
    return c;
  }

  /// Flat disk on the parent surface acting as an attachment plug; the child
  /// tube's first ring welds onto its rim.
  Socket add_socket(int part, const Vec3& center, const Vec3& child_axis,
                    const Vec3& hint, double radius, int segments) {
    Socket s;
    s.face_begin = static_cast<int>(drafts[part].faces.size());
    s.ring = add_ring(part, center, child_axis, hint, radius, segments);
    s.center = add_cap(part, s.ring, center, -child_axis);
    s.face_end = static_cast<int>(drafts[part].faces.size());
    return s;
  }

  /// Reflected copy of a socket (same part), for right-side attachments.
  Socket mirror_socket(int part, const Socket& left) {
    Draft& d = drafts[part];
    Socket s;
    s.face_begin = static_cast<int>(d.faces.size());
    std::map<int, int> vmap;
    for (int v : left.ring) {
      vmap[v] = add_vertex(part, reflect_x(d.vertices[v]));
      s.ring.push_back(vmap[v]);
    }
    s.center = add_vertex(part, reflect_x(d.vertices[left.center]));
    vmap[left.center] = s.center;
    for (int fi = left.face_begin; fi < left.face_end; ++fi) {
      const Face& f = d.faces[fi];
      d.faces.push_back({vmap.at(f[0]), vmap.at(f[2]), vmap.at(f[1])});
    }
    s.face_end = static_cast<int>(d.faces.size());
    return s;
  }

  /// Reflected copy of an entire part. parent_map rewrites weld targets
  /// (left parent vertex -> right parent vertex).
  int mirror_part(int left, const std::string& name, int parent,
                  const std::map<int, int>& parent_map) {
    const int right = add_part(name, parent);
    const Draft& L = drafts[left];
    Draft& R = drafts[right];
    R.vertices.reserve(L.vertices.size());
    for (const Vec3& v : L.vertices) R.vertices.push_back(reflect_x(v));
    R.faces.reserve(L.faces.size());
    for (const Face& f : L.faces) R.faces.push_back({f[0], f[2], f[1]});
    for (const auto& [lv, lpv] : L.welds)
      R.welds.push_back({lv, parent_map.at(lpv)});
    return right;
  }
};

std::map<int, int> ring_map(const Socket& a, const Socket& b) {
  std::map<int, int> m;
  for (size_t k = 0; k < a.ring.size(); ++k) m[a.ring[k]] = b.ring[k];
  m[a.center] = b.center;
  return m;
}

struct TubeKnobs {
  int seg_torso;
  int seg_leg;
  int seg_small;
  int inner;  // inner rings per section
};

TubeKnobs knobs_for(double resolution) {
  TubeKnobs k;
  k.seg_torso = 2 * std::max(5, static_cast<int>(std::lround(8 * resolution)));
  k.seg_leg = 2 * std::max(4, static_cast<int>(std::lround(5 * resolution)));
  k.seg_small = 2 * std::max(3, static_cast<int>(std::lround(4 * resolution)));
  k.inner = std::max(1, static_cast<int>(std::lround(resolution)));
  return k;
}

/// Straight tapered tube appended to `part`, starting from an existing ring.
/// Returns the final ring; `inner` rings are placed between start and end.
std::vector<int> extend_tube(Builder& b, int part, std::vector<int> start_ring,
                             const Vec3& start, const Vec3& end,
                             double r_start, double r_end, int inner,
                             const Vec3& hint) {
  const Vec3 axis = end - start;
  std::vector<int> prev = std::move(start_ring);
  const int steps = inner + 1;
  const int segments = static_cast<int>(prev.size());
  for (int s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    const double r = r_start + (r_end - r_start) * t;
    std::vector<int> ring =
        b.add_ring(part, start + axis * t, axis, hint, r, segments);
    b.connect(part, prev, ring);
    prev = std::move(ring);
  }
  return prev;
}

struct LayoutAnchors {
  std::map<std::string, Vec3> scan;               // 36 single-vertex anchors
  std::map<std::string, Vec3> image;              // 20 anchors, up to 4 verts
};

constexpr int kTorso0 = 0, kTorso6 = 6, kNeck = 7, kHead = 8, kJaw = 9;
constexpr int kLeftEar = 10, kRightEar = 11, kLeftEye = 12, kRightEye = 13;
constexpr int kLFUpper = 14, kLFLower = 15, kLFPaw = 16;
constexpr int kRFUpper = 17, kRFLower = 18, kRFPaw = 19;
constexpr int kLRUpper = 20, kLRLower = 21, kLRPaw = 22;
constexpr int kRRUpper = 23, kRRLower = 24, kRRPaw = 25;
constexpr int kTail0 = 26;

/// Geometry assembly. Left is +x; the body runs along +y toward the head.
std::vector<Draft> build_drafts(const TubeKnobs& k, LayoutAnchors& anchors) {
  Builder b;

  const Vec3 hip(0, 0, 0.75), chest(0, 1.3, 0.8);
  const Vec3 spine_axis = chest - hip;
  auto torso_radius = [](double t) { return 0.26 + 0.04 * std::sin(M_PI * t); };
  auto spine_point = [&](double t) { return hip + spine_axis * t; };

  // Torso chain: 7 sections, boundary rings shared between neighbors.
  std::vector<std::vector<int>> torso_boundary;
  for (int s = 0; s < 7; ++s) {
    const int part = b.add_part("torso_" + std::to_string(s), s - 1);
    std::vector<int> start;
    if (s == 0) {
      start = b.add_ring(part, spine_point(0), spine_axis, Vec3::UnitZ(),
                         torso_radius(0), k.seg_torso);
    } else {
      start = b.weld_ring(part, torso_boundary.back());
    }
    std::vector<int> prev = start;
    const double t0 = s / 7.0, t1 = (s + 1) / 7.0;
    for (int i = 1; i <= k.inner + 1; ++i) {
      const double t = t0 + (t1 - t0) * i / (k.inner + 1);
      std::vector<int> ring = b.add_ring(part, spine_point(t), spine_axis,
                                         Vec3::UnitZ(), torso_radius(t),
                                         k.seg_torso);
      b.connect(part, prev, ring);
      prev = std::move(ring);
    }
    torso_boundary.push_back(prev);
  }

  // Rear annulus from the hip ring down to the tail root ring (torso_0 owns
  // both); tail sections chain off it.
  const Vec3 tail_root(0, -0.14, 0.82);
  std::vector<int> hip_ring;
  {
    // the very first ring created for torso_0
    hip_ring.resize(k.seg_torso);
    for (int i = 0; i < k.seg_torso; ++i) hip_ring[i] = i;
  }
  const Vec3 tail_dir0 = Vec3(0, -1.0, -0.2).normalized();
  std::vector<int> tail_socket = b.add_ring(kTorso0, tail_root, tail_dir0,
                                            Vec3::UnitZ(), 0.055, k.seg_torso);
  b.connect(kTorso0, hip_ring, tail_socket);

  // Chest annulus to the neck root ring (torso_6 owns both).
  const Vec3 neck_root(0, 1.42, 0.92);
  const Vec3 neck_dir = Vec3(0, 0.8, 0.55).normalized();
  std::vector<int> neck_socket = b.add_ring(kTorso6, neck_root, neck_dir,
                                            Vec3::UnitZ(), 0.13, k.seg_torso);
  b.connect(kTorso6, torso_boundary.back(), neck_socket);

  // Neck and head.
  const Vec3 neck_top(0, 1.62, 1.06);
  const int neck = b.add_part("neck", kTorso6);
  std::vector<int> neck_start = b.weld_ring(neck, neck_socket);
  std::vector<int> neck_end = extend_tube(b, neck, neck_start, neck_root,
                                          neck_top, 0.13, 0.115, k.inner,
                                          Vec3::UnitZ());

  const Vec3 nose(0, 1.98, 1.02);
  const int head = b.add_part("head", neck);
  std::vector<int> head_start = b.weld_ring(head, neck_end);
  const Vec3 head_axis = nose - neck_top;
  const std::vector<double> head_profile_t = {0.3, 0.5, 0.75, 1.0};
  const std::vector<double> head_profile_r = {0.16, 0.165, 0.13, 0.055};
  std::vector<int> prev_head = head_start;
  for (size_t i = 0; i < head_profile_t.size(); ++i) {
    std::vector<int> ring = b.add_ring(
        head, neck_top + head_axis * head_profile_t[i], head_axis,
        Vec3::UnitZ(), head_profile_r[i], k.seg_torso);
    b.connect(head, prev_head, ring);
    prev_head = std::move(ring);
  }
  b.add_cap(head, prev_head, nose, head_axis);

  // Jaw under the head.
  const Vec3 jaw_root(0, 1.76, 0.90);
  const Vec3 jaw_tip(0, 1.93, 0.80);
  const Vec3 jaw_axis = (jaw_tip - jaw_root).normalized();
  Socket jaw_socket =
      b.add_socket(kHead, jaw_root, jaw_axis, Vec3::UnitZ(), 0.055, k.seg_small);
  const int jaw = b.add_part("jaw", kHead);
  std::vector<int> jaw_start = b.weld_ring(jaw, jaw_socket.ring);
  std::vector<int> jaw_end = extend_tube(b, jaw, jaw_start, jaw_root, jaw_tip,
                                         0.055, 0.035, k.inner, Vec3::UnitZ());
  b.add_cap(jaw, jaw_end, jaw_tip, jaw_tip - jaw_root);

  // Ears and eye patches: left built explicitly, right mirrored.
  const Vec3 ear_root(0.08, 1.70, 1.19), ear_tip(0.13, 1.66, 1.33);
  const Vec3 ear_axis = (ear_tip - ear_root).normalized();
  Socket lear_socket =
      b.add_socket(kHead, ear_root, ear_axis, Vec3::UnitY(), 0.045, k.seg_small);
  const int lear = b.add_part("left_ear", kHead);
  {
    std::vector<int> start = b.weld_ring(lear, lear_socket.ring);
    std::vector<int> end = extend_tube(b, lear, start, ear_root, ear_tip,
                                       0.045, 0.012, k.inner, Vec3::UnitY());
    b.add_cap(lear, end, ear_tip, ear_tip - ear_root);
  }
  Socket rear_socket = b.mirror_socket(kHead, lear_socket);
  b.mirror_part(lear, "right_ear", kHead, ring_map(lear_socket, rear_socket));

  const Vec3 eye_root(0.075, 1.86, 1.10);
  const Vec3 eye_axis = Vec3(0.45, 0.75, 0.55).normalized();
  const Vec3 eye_tip = eye_root + eye_axis * 0.03;
  Socket leye_socket =
      b.add_socket(kHead, eye_root, eye_axis, Vec3::UnitZ(), 0.035, k.seg_small);
  const int leye = b.add_part("left_eye", kHead);
  {
    std::vector<int> start = b.weld_ring(leye, leye_socket.ring);
    std::vector<int> end = extend_tube(b, leye, start, eye_root, eye_tip,
                                       0.035, 0.02, 0, Vec3::UnitZ());
    b.add_cap(leye, end, eye_tip, eye_axis);
  }
  Socket reye_socket = b.mirror_socket(kHead, leye_socket);
  b.mirror_part(leye, "right_eye", kHead, ring_map(leye_socket, reye_socket));

  // Legs: front pair hangs off torso_6, rear pair off torso_0.
  struct LegSpec {
    const char* prefix;
    int parent;
    Vec3 socket, knee, ankle, toe;
    double r_socket, r_knee, r_ankle, r_toe;
  };
  const LegSpec front{"front", kTorso6,
                      Vec3(0.14, 1.15, 0.52), Vec3(0.14, 1.13, 0.30),
                      Vec3(0.14, 1.16, 0.10), Vec3(0.14, 1.28, 0.035),
                      0.085, 0.06, 0.045, 0.042};
  const LegSpec rear{"rear", kTorso0,
                     Vec3(0.15, 0.12, 0.50), Vec3(0.15, 0.06, 0.28),
                     Vec3(0.15, 0.12, 0.09), Vec3(0.15, 0.25, 0.035),
                     0.09, 0.065, 0.045, 0.042};

  for (const LegSpec& leg : {front, rear}) {
    Socket lsock = b.add_socket(leg.parent, leg.socket,
                                (leg.knee - leg.socket).normalized(),
                                Vec3::UnitY(), leg.r_socket, k.seg_leg);
    const std::string lu = std::string("left_") + leg.prefix + "_upper";
    const int upper = b.add_part(lu, leg.parent);
    std::vector<int> uend;
    {
      std::vector<int> start = b.weld_ring(upper, lsock.ring);
      uend = extend_tube(b, upper, start, leg.socket, leg.knee, leg.r_socket,
                         leg.r_knee, k.inner, Vec3::UnitY());
    }
    const int lower =
        b.add_part(std::string("left_") + leg.prefix + "_lower", upper);
    std::vector<int> lend;
    {
      std::vector<int> start = b.weld_ring(lower, uend);
      lend = extend_tube(b, lower, start, leg.knee, leg.ankle, leg.r_knee,
                         leg.r_ankle, k.inner, Vec3::UnitY());
    }
    const int paw =
        b.add_part(std::string("left_") + leg.prefix + "_paw", lower);
    {
      std::vector<int> start = b.weld_ring(paw, lend);
      std::vector<int> end = extend_tube(b, paw, start, leg.ankle, leg.toe,
                                         leg.r_ankle, leg.r_toe, k.inner,
                                         Vec3::UnitZ());
      b.add_cap(paw, end, leg.toe, leg.toe - leg.ankle);
    }
    // Mirrored right side.
    Socket rsock = b.mirror_socket(leg.parent, lsock);
    const int rupper =
        b.mirror_part(upper, std::string("right_") + leg.prefix + "_upper",
                      leg.parent, ring_map(lsock, rsock));
    std::map<int, int> identity_u;
    for (int v = 0; v < static_cast<int>(b.drafts[upper].vertices.size()); ++v)
      identity_u[v] = v;
    const int rlower =
        b.mirror_part(lower, std::string("right_") + leg.prefix + "_lower",
                      rupper, identity_u);
    std::map<int, int> identity_l;
    for (int v = 0; v < static_cast<int>(b.drafts[lower].vertices.size()); ++v)
      identity_l[v] = v;
    b.mirror_part(paw, std::string("right_") + leg.prefix + "_paw", rlower,
                  identity_l);
  }

  // Tail chain: seven short sections with a drooping axis.
  std::vector<Vec3> tail_points{tail_root};
  for (int s = 0; s < 7; ++s) {
    const Vec3 dir = Vec3(0, -1.0, -0.2 - 0.11 * s).normalized();
    tail_points.push_back(tail_points.back() + dir * 0.115);
  }
  auto tail_radius = [](int s) { return 0.055 - 0.0055 * s; };
  std::vector<int> prev_tail = tail_socket;
  int prev_part = kTorso0;
  for (int s = 0; s < 7; ++s) {
    const int part = b.add_part("tail_" + std::to_string(s), prev_part);
    std::vector<int> start = b.weld_ring(part, prev_tail);
    std::vector<int> end = extend_tube(
        b, part, start, tail_points[s], tail_points[s + 1], tail_radius(s),
        tail_radius(s + 1), s == 6 ? k.inner : 0, Vec3::UnitZ());
    if (s == 6) b.add_cap(part, end, tail_points[7], tail_points[7] - tail_points[6]);
    prev_tail = std::move(end);
    prev_part = part;
  }

  // Keypoint anchors, resolved to nearest merged vertices later.
  auto& A = anchors.scan;
  A["nose_tip"] = nose;
  A["chin"] = jaw_tip;
  A["forehead"] = neck_top + head_axis * 0.5 + Vec3(0, 0, 0.165);
  A["left_eye"] = eye_tip;
  A["right_eye"] = reflect_x(eye_tip);
  A["left_ear_tip"] = ear_tip;
  A["right_ear_tip"] = reflect_x(ear_tip);
  A["left_ear_base"] = ear_root;
  A["right_ear_base"] = reflect_x(ear_root);
  A["throat"] = Vec3(0, 1.55, 0.88);
  A["withers"] = Vec3(0, 1.3, 1.06);
  A["mid_back"] = Vec3(0, 0.65, 1.08);
  A["croup"] = Vec3(0, 0.05, 1.02);
  A["chest"] = Vec3(0, 1.2, 0.52);
  A["belly"] = Vec3(0, 0.65, 0.47);
  A["left_hip"] = Vec3(0.27, 0.05, 0.80);
  A["right_hip"] = reflect_x(Vec3(0.27, 0.05, 0.80));
  A["tail_base"] = tail_root;
  A["tail_mid"] = tail_points[4];
  A["tail_tip"] = tail_points[7];
  A["left_shoulder"] = front.socket;
  A["left_elbow"] = front.knee;
  A["left_front_ankle"] = front.ankle;
  A["left_front_paw"] = front.toe;
  A["right_shoulder"] = reflect_x(front.socket);
  A["right_elbow"] = reflect_x(front.knee);
  A["right_front_ankle"] = reflect_x(front.ankle);
  A["right_front_paw"] = reflect_x(front.toe);
  A["left_haunch"] = rear.socket;
  A["left_rear_knee"] = rear.knee;
  A["left_rear_ankle"] = rear.ankle;
  A["left_rear_paw"] = rear.toe;
  A["right_haunch"] = reflect_x(rear.socket);
  A["right_rear_knee"] = reflect_x(rear.knee);
  A["right_rear_ankle"] = reflect_x(rear.ankle);
  A["right_rear_paw"] = reflect_x(rear.toe);

  auto& I = anchors.image;
  for (const char* name :
       {"left_eye", "right_eye", "left_ear_tip", "right_ear_tip", "nose_tip",
        "chin", "left_elbow", "right_elbow", "left_front_paw",
        "right_front_paw", "left_rear_knee", "right_rear_knee",
        "left_rear_paw", "right_rear_paw", "left_shoulder", "right_shoulder",
        "left_haunch", "right_haunch", "tail_tip"})
    I[name] = A.at(name);
  I["neck_base"] = Vec3(0, 1.42, 1.05);

  return b.drafts;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 < 1e-30) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

}  // namespace

PartCategory part_category(const std::string& name) {
  auto has = [&](const char* s) { return name.find(s) != std::string::npos; };
  if (has("torso")) return PartCategory::Torso;
  if (has("neck")) return PartCategory::Neck;
  if (has("jaw")) return PartCategory::Jaw;
  if (has("head")) return PartCategory::Head;
  if (has("ear")) return PartCategory::Ear;
  if (has("eye")) return PartCategory::Eye;
  if (has("upper")) return PartCategory::LegUpper;
  if (has("lower")) return PartCategory::LegLower;
  if (has("paw")) return PartCategory::Paw;
  if (has("tail")) return PartCategory::Tail;
  throw validation_error("unknown part name: " + name);
}

Vec3 category_rotation_bound(PartCategory cat) {
  switch (cat) {
    case PartCategory::Torso:
      return Vec3(0.5, 0.5, 0.5);
    case PartCategory::Neck:
    case PartCategory::Head:
      return Vec3(0.5, 0.5, 0.5);
    case PartCategory::Jaw:
      return Vec3(0.5, 0.2, 0.2);
    case PartCategory::Ear:
    case PartCategory::Eye:
      return Vec3(0.15, 0.15, 0.15);
    case PartCategory::LegUpper:
    case PartCategory::LegLower:
      return Vec3(1.5, 0.6, 0.6);
    case PartCategory::Paw:
      return Vec3(0.8, 0.4, 0.4);
    case PartCategory::Tail:
      return Vec3(1.2, 1.2, 1.2);
  }
  return Vec3(0.5, 0.5, 0.5);
}

GlossTemplate make_template(double resolution) {
  if (resolution <= 0) throw validation_error("resolution must be positive");
  const TubeKnobs k = knobs_for(resolution);
  LayoutAnchors anchors;
  const std::vector<Draft> drafts = build_drafts(k, anchors);
  const int n = static_cast<int>(drafts.size());
  if (n != 33) throw validation_error("template must have 33 parts");

  GlossTemplate t;
  t.parts.resize(n);
  t.interfaces.reserve(n - 1);

  // Merged mesh: welded vertices share the parent's merged id.
  std::vector<std::vector<int>> merged_of(n);
  for (int i = 0; i < n; ++i) {
    const Draft& d = drafts[i];
    std::vector<int> weld_target(d.vertices.size(), -1);
    for (const auto& [lv, pv] : d.welds)
      weld_target[lv] = merged_of[d.parent][pv];
    merged_of[i].resize(d.vertices.size());
    for (size_t v = 0; v < d.vertices.size(); ++v) {
      if (weld_target[v] >= 0) {
        merged_of[i][v] = weld_target[v];
      } else {
        merged_of[i][v] = t.merged_mesh.vertex_count();
        t.merged_mesh.vertices.push_back(d.vertices[v]);
        t.labeling.part_of_vertex.push_back(i);
      }
    }
    for (const Face& f : d.faces)
      t.merged_mesh.faces.push_back(
          {merged_of[i][f[0]], merged_of[i][f[1]], merged_of[i][f[2]]});
  }
  t.labeling.part_count = n;
  validate_mesh(t.merged_mesh);

  // Part local meshes, centroid at the origin.
  for (int i = 0; i < n; ++i) {
    const Draft& d = drafts[i];
    PartMesh& pm = t.parts[i];
    pm.name = d.name;
    pm.faces = d.faces;
    pm.merged_index = merged_of[i];
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& v : d.vertices) centroid += v;
    centroid /= static_cast<double>(d.vertices.size());
    pm.neutral_location = centroid;
    pm.vertices.reserve(d.vertices.size());
    for (const Vec3& v : d.vertices) pm.vertices.push_back(v - centroid);
    if (i > 0) {
      PartInterface itf;
      itf.part_a = i;
      itf.part_b = d.parent;
      for (const auto& [lv, pv] : d.welds) itf.pairs.push_back({lv, pv});
      t.interfaces.push_back(std::move(itf));
    }
  }

  // Kinematic tree: joints at interface-ring centroids, root at the pelvis
  // part centroid. joint_rings hold the merged ids the rule averages.
  t.tree.parent.resize(n);
  t.joint_rings.resize(n);
  for (int i = 0; i < n; ++i) {
    t.tree.parent[i] = drafts[i].parent;
    if (i == 0) {
      t.joint_rings[i] = merged_of[0];
    } else {
      for (const auto& [lv, pv] : drafts[i].welds)
        t.joint_rings[i].push_back(merged_of[i][lv]);
    }
  }
  t.tree.joint_positions = t.regress_joints(t.merged_mesh.vertices);

  // Skinning weights: inverse-square falloff to the bones of the owning part
  // and its tree neighbors, at most four entries.
  std::vector<std::vector<int>> children(n);
  for (int i = 1; i < n; ++i) children[t.tree.parent[i]].push_back(i);
  std::vector<Vec3> bone_end(n);
  for (int i = 0; i < n; ++i) {
    if (!children[i].empty()) {
      Vec3 acc = Vec3::Zero();
      for (int c : children[i]) acc += t.tree.joint_positions[c];
      bone_end[i] = acc / static_cast<double>(children[i].size());
    } else {
      double best = -1;
      for (int m : merged_of[i]) {
        const double d =
            (t.merged_mesh.vertices[m] - t.tree.joint_positions[i]).norm();
        if (d > best) {
          best = d;
          bone_end[i] = t.merged_mesh.vertices[m];
        }
      }
    }
  }
  const double falloff = 0.06;
  t.weights.rows.resize(t.merged_vertex_count());
  for (int m = 0; m < t.merged_vertex_count(); ++m) {
    const int own = t.labeling.part_of_vertex[m];
    std::vector<int> cands{own};
    if (t.tree.parent[own] >= 0) cands.push_back(t.tree.parent[own]);
    for (int c : children[own]) cands.push_back(c);
    std::vector<std::pair<double, int>> scored;
    for (int c : cands) {
      const double d = point_segment_distance(
          t.merged_mesh.vertices[m], t.tree.joint_positions[c], bone_end[c]);
      scored.emplace_back(1.0 / (d * d + falloff * falloff), c);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    if (scored.size() > 4) scored.resize(4);
    double sum = 0;
    for (const auto& [w, c] : scored) sum += w;
    auto& row = t.weights.rows[m];
    for (const auto& [w, c] : scored) row.emplace_back(c, w / sum);
    std::sort(row.begin(), row.end());
    // Exact unit sum.
    double acc = 0;
    for (size_t e = 0; e + 1 < row.size(); ++e) acc += row[e].second;
    row.back().second = 1.0 - acc;
  }

  // Mirror pairing over the merged mesh.
  t.mirror = build_mirror_correspondence(t.merged_mesh, 1e-6);

  // Keypoints: nearest merged vertex to each named anchor.
  auto nearest_vertex = [&](const Vec3& p) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int m = 0; m < t.merged_vertex_count(); ++m) {
      const double d = (t.merged_mesh.vertices[m] - p).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    return best;
  };
  std::vector<std::vector<int>> local_of_merged(t.merged_vertex_count());
  for (int i = 0; i < n; ++i)
    for (int v = 0; v < t.parts[i].vertex_count(); ++v)
      local_of_merged[t.parts[i].merged_index[v]].push_back(i);
  for (const auto& [name, anchor] : anchors.scan) {
    const int m = nearest_vertex(anchor);
    t.scan_keypoint_vertices[name] = m;
    const int part = t.labeling.part_of_vertex[m];
    int local = -1;
    for (int v = 0; v < t.parts[part].vertex_count(); ++v)
      if (t.parts[part].merged_index[v] == m) {
        local = v;
        break;
      }
    t.scan_keypoints[name] = PartVertexRef{part, local};
  }
  for (const auto& [name, anchor] : anchors.image) {
    std::vector<std::pair<double, int>> by_dist;
    for (int m = 0; m < t.merged_vertex_count(); ++m)
      by_dist.emplace_back((t.merged_mesh.vertices[m] - anchor).squaredNorm(),
                           m);
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<int> verts;
    for (int j = 0; j < 4; ++j) verts.push_back(by_dist[j].second);
    t.image_keypoints[name] = std::move(verts);
  }

  // Symmetry groups: torso sections, left/right limb segments, all paws,
  // ears, and eye patches.
  t.symmetry_groups = {
      {0, 1, 2, 3, 4, 5, 6},
      {kLFUpper, kRFUpper},
      {kLFLower, kRFLower},
      {kLRUpper, kRRUpper},
      {kLRLower, kRRLower},
      {kLFPaw, kRFPaw, kLRPaw, kRRPaw},
      {kLeftEar, kRightEar},
      {kLeftEye, kRightEye},
  };

  // Analytic shape space and its synthetic prior.
  t.shape_basis.resize(n);
  for (int i = 0; i < n; ++i)
    t.shape_basis[i] = build_shape_basis(t.parts[i].vertices);
  t.shape_prior_variance = VecX(7);
  t.shape_prior_variance << 0.25, 0.1, 0.1, 0.1, 0.05, 0.05, 0.05;

  for (int i = kTail0; i < n; ++i) t.tail_parts.push_back(i);

  // Pose-deformation basis from the scripted animation, sampled per part in
  // the part's bone frame.
  const std::vector<VecX> frames = scripted_animation_thetas(t);
  std::vector<std::vector<VecX>> samples(n);
  for (const VecX& theta : frames) {
    const JointTransforms jt = forward_kinematics(t.tree, theta, Vec3::Zero());
    const std::vector<Vec3> posed = apply_blended(
        part_transforms(t.tree, jt), t.weights, t.merged_mesh.vertices);
    for (int i = 0; i < n; ++i) {
      const PartMesh& pm = t.parts[i];
      const Vec3 origin = jt.rot[i] * (pm.neutral_location -
                                       t.tree.joint_positions[i]) +
                          jt.pos[i];
      VecX delta(3 * pm.vertex_count());
      for (int v = 0; v < pm.vertex_count(); ++v) {
        const Vec3 local =
            jt.rot[i].transpose() * (posed[pm.merged_index[v]] - origin);
        delta.segment<3>(3 * v) = local - pm.vertices[v];
      }
      samples[i].push_back(std::move(delta));
    }
  }
  t.pose_basis.resize(n);
  for (int i = 0; i < n; ++i)
    t.pose_basis[i] = build_pose_basis(samples[i], 0.9, 5);

  // Tail pose prior: per-axis variance of the scripted relative rotations.
  t.tail_prior_variance.assign(t.tail_parts.size(), Vec3::Zero());
  for (const VecX& theta : frames)
    for (size_t ti = 0; ti < t.tail_parts.size(); ++ti)
      t.tail_prior_variance[ti] +=
          theta.segment<3>(3 * t.tail_parts[ti]).cwiseAbs2();
  for (Vec3& v : t.tail_prior_variance)
    v = (v / static_cast<double>(frames.size())).cwiseMax(1e-3);

  t.validate();
  return t;
}

}  // namespace smal
