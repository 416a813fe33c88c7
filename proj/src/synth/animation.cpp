#include <cmath>

#include "smal/synth/synth.hpp"

namespace smal {

namespace {

int part_index(const GlossTemplate& t, const std::string& name) {
  for (int i = 0; i < t.part_count(); ++i)
    if (t.parts[i].name == name) return i;
  throw validation_error("no part named " + name);
}

struct PartIds {
  int lfu, rfu, lru, rru;
  int lfl, rfl, lrl, rrl;
  int lfp, rfp, lrp, rrp;
  int neck, head, jaw;
  std::vector<int> torso, tail;
};

PartIds lookup(const GlossTemplate& t) {
  PartIds p;
  p.lfu = part_index(t, "left_front_upper");
  p.rfu = part_index(t, "right_front_upper");
  p.lru = part_index(t, "left_rear_upper");
  p.rru = part_index(t, "right_rear_upper");
  p.lfl = part_index(t, "left_front_lower");
  p.rfl = part_index(t, "right_front_lower");
  p.lrl = part_index(t, "left_rear_lower");
  p.rrl = part_index(t, "right_rear_lower");
  p.lfp = part_index(t, "left_front_paw");
  p.rfp = part_index(t, "right_front_paw");
  p.lrp = part_index(t, "left_rear_paw");
  p.rrp = part_index(t, "right_rear_paw");
  p.neck = part_index(t, "neck");
  p.head = part_index(t, "head");
  p.jaw = part_index(t, "jaw");
  for (int i = 0; i < t.part_count(); ++i) {
    const PartCategory c = part_category(t.parts[i].name);
    if (c == PartCategory::Torso && i != 0) p.torso.push_back(i);
    if (c == PartCategory::Tail) p.tail.push_back(i);
  }
  return p;
}

}  // namespace

std::vector<VecX> scripted_walk_thetas(const GlossTemplate& t) {
  const PartIds p = lookup(t);
  const int dim = 3 * t.part_count();
  std::vector<VecX> frames;
  const int count = 12;
  for (int f = 0; f < count; ++f) {
    const double ps = 2.0 * M_PI * f / count;
    VecX theta = VecX::Zero(dim);
    auto set = [&](int part, double x, double y, double z) {
      theta.segment<3>(3 * part) = Vec3(x, y, z);
    };
    // Diagonal gait: left-front with right-rear.
    set(p.lfu, 0.45 * std::sin(ps), 0, 0);
    set(p.rru, 0.45 * std::sin(ps), 0, 0);
    set(p.rfu, 0.45 * std::sin(ps + M_PI), 0, 0);
    set(p.lru, 0.45 * std::sin(ps + M_PI), 0, 0);
    set(p.lfl, 0.30 * std::sin(ps + 0.6), 0, 0);
    set(p.rrl, 0.30 * std::sin(ps + 0.6), 0, 0);
    set(p.rfl, 0.30 * std::sin(ps + M_PI + 0.6), 0, 0);
    set(p.lrl, 0.30 * std::sin(ps + M_PI + 0.6), 0, 0);
    set(p.lfp, 0.15 * std::sin(ps + 1.1), 0, 0);
    set(p.rrp, 0.15 * std::sin(ps + 1.1), 0, 0);
    set(p.rfp, 0.15 * std::sin(ps + M_PI + 1.1), 0, 0);
    set(p.lrp, 0.15 * std::sin(ps + M_PI + 1.1), 0, 0);
    for (size_t i = 0; i < p.torso.size(); ++i)
      set(p.torso[i], 0.02 * std::sin(2 * ps), 0,
          0.03 * std::sin(ps + 0.4 * i));
    set(p.neck, 0.08 * std::sin(ps), 0, 0.02 * std::sin(ps));
    set(p.head, 0.05 * std::sin(ps + 0.4), 0, 0);
    for (size_t i = 0; i < p.tail.size(); ++i)
      set(p.tail[i], 0.08 * std::cos(ps + 0.5 * i), 0,
          0.15 * std::sin(ps + 0.6 * i));
    frames.push_back(std::move(theta));
  }
  return frames;
}

std::vector<VecX> scripted_animation_thetas(const GlossTemplate& t) {
  const PartIds p = lookup(t);
  const int dim = 3 * t.part_count();
  std::vector<VecX> frames = scripted_walk_thetas(t);

  // Tail swish.
  for (int f = 0; f < 8; ++f) {
    const double ps = 2.0 * M_PI * f / 8;
    VecX theta = VecX::Zero(dim);
    for (size_t i = 0; i < p.tail.size(); ++i) {
      theta[3 * p.tail[i] + 0] = 0.25 * std::sin(0.7 * ps + 0.5 * i);
      theta[3 * p.tail[i] + 2] = 0.45 * std::sin(ps + 0.8 * i);
    }
    frames.push_back(std::move(theta));
  }

  // Head turn and nod.
  for (int f = 0; f < 6; ++f) {
    const double a = -0.4 + 0.8 * f / 5.0;
    VecX theta = VecX::Zero(dim);
    theta[3 * p.neck + 2] = a;
    theta[3 * p.head + 2] = 0.5 * a;
    theta[3 * p.head + 0] = 0.2 * std::sin(M_PI * f / 5.0);
    frames.push_back(std::move(theta));
  }

  // Jaw opening.
  for (int f = 1; f <= 3; ++f) {
    VecX theta = VecX::Zero(dim);
    theta[3 * p.jaw + 0] = 0.15 * f;
    frames.push_back(std::move(theta));
  }
  return frames;
}

FamilyRecipe family_recipe(const std::string& name) {
  FamilyRecipe r;
  r.name = name;
  if (name == "feline") {
    r.body_scale = 0.0;
    r.torso_length = 0.05;
    r.leg_length = 0.0;
    r.leg_width = -0.05;
    r.neck_length = -0.05;
    r.head_scale = 0.0;
    r.tail_length = 0.25;
  } else if (name == "canine") {
    r.body_scale = -0.1;
    r.torso_length = 0.0;
    r.torso_width = -0.08;
    r.leg_length = 0.1;
    r.leg_width = -0.08;
    r.neck_length = 0.05;
    r.head_scale = -0.05;
    r.tail_length = 0.1;
  } else if (name == "equine") {
    r.body_scale = 0.12;
    r.torso_length = 0.1;
    r.torso_width = -0.05;
    r.leg_length = 0.35;
    r.leg_width = -0.12;
    r.neck_length = 0.3;
    r.head_scale = 0.05;
    r.tail_length = 0.05;
  } else if (name == "bovine") {
    r.body_scale = 0.15;
    r.torso_length = 0.08;
    r.torso_width = 0.15;
    r.leg_length = 0.05;
    r.leg_width = 0.05;
    r.neck_length = -0.1;
    r.head_scale = 0.08;
    r.tail_length = 0.0;
  } else if (name == "hippo") {
    r.body_scale = 0.2;
    r.torso_length = 0.05;
    r.torso_width = 0.3;
    r.leg_length = -0.3;
    r.leg_width = 0.25;
    r.neck_length = -0.25;
    r.head_scale = 0.2;
    r.tail_length = -0.3;
  } else if (name == "generic") {
    // zero means
  } else {
    throw validation_error("unknown family: " + name);
  }
  return r;
}

std::vector<std::string> family_names() {
  return {"feline", "canine", "equine", "bovine", "hippo"};
}

}  // namespace smal
