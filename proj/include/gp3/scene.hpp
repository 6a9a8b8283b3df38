#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gp3/geometry.hpp"

namespace gp3::scenegen {

enum class ObjectKind { Cube, Sphere, FlatDecoy };

// Anamorphic print carried by a flat decoy: the virtual object whose frontal
// appearance is printed on the table plane, plus the camera the print was
// projected from. Seen from that camera the decoy region is pixelwise
// identical to rendering the virtual object itself.
struct PrintSpec {
    ObjectKind kind = ObjectKind::Cube;
    geom::Vec3 center;
    double half_extent = 0;
    int color_id = 0;
    geom::CameraParams camera;
};

struct SceneObject {
    ObjectKind kind = ObjectKind::Cube;
    geom::Vec3 center;       // flat decoys sit exactly on the table plane
    double half_extent = 0;  // sphere radius / cube half side / decoy max rect half-extent
    int color_id = 0;
    // decoy-only fields
    double rect_hx = 0, rect_hy = 0;
    std::optional<PrintSpec> print;
};

struct Scene {
    std::vector<SceneObject> objects;
    double table_height = 0.0;
    std::optional<geom::Vec3> arm_tip;
    int target_index = -1;
};

struct GenSpec {
    int n_objects = 1;
    bool decoy = false;
};

// deterministic in (seed, spec); throws when placement fails after 1000 tries
Scene generate_scene(uint64_t seed, const GenSpec& spec);

// throws when a Scene invariant is violated
void validate_scene(const Scene& scene);

// ---- palette & language ----

inline constexpr int kNumColors = 6;
std::array<double, 3> color_rgb(int color_id);
std::array<double, 3> background_rgb();
const std::string& color_name(int color_id);
const std::string& kind_name(ObjectKind kind);  // instruction noun

const std::vector<std::string>& vocabulary();  // 32 entries
std::vector<int> tokenize(const std::string& text);
std::string detokenize(const std::vector<int>& ids);

// "push|reach the <color> <shape>"
std::string instruction_text(const std::string& verb, const SceneObject& target);

// ---- camera rig ----

inline constexpr int kMaxViews = 4;
// 0 = front, 1 = left corner, 2 = right corner, 3 = top
geom::CameraParams rig_camera(int index);

}  // namespace gp3::scenegen
