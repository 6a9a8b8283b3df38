#include "gp3/scene.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "gp3/rng.hpp"

namespace gp3::scenegen {

namespace {

constexpr double kPlacementMargin = 0.03;
constexpr double kMinHalfExtent = 0.07;
constexpr double kMaxHalfExtent = 0.10;
constexpr double kDecoyRectMargin = 0.012;

double xy_dist(const geom::Vec3& a, const geom::Vec3& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

double footprint(const SceneObject& o) {
    return o.kind == ObjectKind::FlatDecoy ? std::max(o.rect_hx, o.rect_hy) : o.half_extent;
}

bool placement_free(const Scene& scene, const geom::Vec3& pos, double radius) {
    for (const auto& o : scene.objects)
        if (xy_dist(o.center, pos) < radius + footprint(o) + kPlacementMargin) return false;
    return true;
}

// Projects the virtual object's bounding-box corners from the print camera
// center onto the table plane; the decoy rectangle is their xy bounding box.
void decoy_rect(const PrintSpec& print, double table_z, geom::Vec3& center, double& hx,
                double& hy) {
    const geom::Vec3 o = print.camera.center();
    double xmin = 1e30, xmax = -1e30, ymin = 1e30, ymax = -1e30;
    for (int i = 0; i < 8; ++i) {
        const geom::Vec3 corner{
            print.center.x + ((i & 1) ? print.half_extent : -print.half_extent),
            print.center.y + ((i & 2) ? print.half_extent : -print.half_extent),
            print.center.z + ((i & 4) ? print.half_extent : -print.half_extent)};
        const geom::Vec3 d = corner - o;
        if (std::abs(d.z) < 1e-12) continue;
        const double t = (table_z - o.z) / d.z;
        const geom::Vec3 p = o + d * t;
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    center = {0.5 * (xmin + xmax), 0.5 * (ymin + ymax), table_z};
    hx = 0.5 * (xmax - xmin) + kDecoyRectMargin;
    hy = 0.5 * (ymax - ymin) + kDecoyRectMargin;
}

}  // namespace

Scene generate_scene(uint64_t seed, const GenSpec& spec) {
    if (spec.n_objects < 1 || spec.n_objects > 8)
        throw std::invalid_argument("generate_scene: n_objects must be in [1,8]");
    rng::Stream rs(rng::substream(seed, /*stream=*/101, spec.n_objects, spec.decoy ? 1 : 0));
    Scene scene;
    scene.table_height = 0.0;

    // distinct colors, target first
    std::vector<int> colors(kNumColors);
    for (int i = 0; i < kNumColors; ++i) colors[i] = i;
    rs.shuffle(colors);

    auto sample_object = [&](int idx) -> SceneObject {
        SceneObject obj;
        obj.kind = rs.uniform() < 0.5 ? ObjectKind::Cube : ObjectKind::Sphere;
        obj.color_id = colors[idx % kNumColors];
        obj.half_extent = rs.uniform(kMinHalfExtent, kMaxHalfExtent);
        return obj;
    };

    for (int i = 0; i < spec.n_objects; ++i) {
        SceneObject obj = sample_object(i);
        bool placed = false;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const geom::Vec3 pos{rs.uniform(0.2, 0.8), rs.uniform(0.25, 0.75), 0.0};
            if (placement_free(scene, pos, obj.half_extent)) {
                obj.center = {pos.x, pos.y, scene.table_height + obj.half_extent};
                placed = true;
                break;
            }
        }
        if (!placed)
            throw std::runtime_error("generate_scene: unplaceable object for seed " +
                                     std::to_string(seed));
        scene.objects.push_back(obj);
    }
    scene.target_index = 0;

    if (spec.decoy) {
        const SceneObject& target = scene.objects[scene.target_index];
        SceneObject decoy;
        decoy.kind = ObjectKind::FlatDecoy;
        decoy.color_id = target.color_id;
        bool placed = false;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            const geom::Vec3 pos{rs.uniform(0.25, 0.75), rs.uniform(0.3, 0.7), 0.0};
            PrintSpec print;
            print.kind = target.kind;
            print.color_id = target.color_id;
            print.half_extent = target.half_extent;
            print.center = {pos.x, pos.y, scene.table_height + target.half_extent};
            print.camera = rig_camera(0);
            geom::Vec3 rc;
            double hx, hy;
            decoy_rect(print, scene.table_height, rc, hx, hy);
            if (!placement_free(scene, rc, std::max(hx, hy))) continue;
            decoy.center = rc;
            decoy.rect_hx = hx;
            decoy.rect_hy = hy;
            decoy.half_extent = std::max(hx, hy);
            decoy.print = print;
            placed = true;
            break;
        }
        if (!placed)
            throw std::runtime_error("generate_scene: unplaceable decoy for seed " +
                                     std::to_string(seed));
        scene.objects.push_back(decoy);
    }

    validate_scene(scene);
    return scene;
}

void validate_scene(const Scene& scene) {
    int decoys = 0;
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        const auto& o = scene.objects[i];
        const std::string tag = "scene object " + std::to_string(i);
        if (o.kind == ObjectKind::FlatDecoy) {
            ++decoys;
            if (std::abs(o.center.z - scene.table_height) > 1e-9)
                throw std::runtime_error(tag + ": decoy must lie exactly on the table plane");
            if (o.rect_hx <= 0 || o.rect_hy <= 0 || !o.print)
                throw std::runtime_error(tag + ": decoy missing rectangle or print definition");
        } else {
            if (o.half_extent <= 0) throw std::runtime_error(tag + ": non-positive half extent");
            if (o.center.z - o.half_extent < scene.table_height - 1e-9)
                throw std::runtime_error(tag + ": object penetrates the table plane");
        }
        if (o.center.x < 0 || o.center.x > 1 || o.center.y < 0 || o.center.y > 1 ||
            o.center.z < 0 || o.center.z > 1)
            throw std::runtime_error(tag + ": center outside the unit workspace cube");
        if (o.color_id < 0 || o.color_id >= kNumColors)
            throw std::runtime_error(tag + ": color id out of palette");
    }
    (void)decoys;
}

// ---- palette & language ----

std::array<double, 3> color_rgb(int color_id) {
    static const std::array<std::array<double, 3>, kNumColors + 1> palette = {{
        {0.80, 0.12, 0.12},  // red
        {0.10, 0.65, 0.18},  // green
        {0.15, 0.25, 0.85},  // blue
        {0.88, 0.82, 0.10},  // yellow
        {0.55, 0.15, 0.70},  // purple
        {0.90, 0.50, 0.10},  // orange
        {0.30, 0.30, 0.35},  // arm marker (not a target color)
    }};
    if (color_id < 0 || color_id > kNumColors)
        throw std::invalid_argument("color_rgb: unknown color id " + std::to_string(color_id));
    return palette[color_id];
}

std::array<double, 3> background_rgb() { return {0.92, 0.92, 0.95}; }

const std::string& color_name(int color_id) {
    static const std::vector<std::string> names = {"red", "green", "blue",
                                                   "yellow", "purple", "orange"};
    if (color_id < 0 || color_id >= kNumColors)
        throw std::invalid_argument("color_name: unknown color id " + std::to_string(color_id));
    return names[color_id];
}

const std::string& kind_name(ObjectKind kind) {
    static const std::string cube = "cube", sphere = "sphere";
    return kind == ObjectKind::Sphere ? sphere : cube;
}

const std::vector<std::string>& vocabulary() {
    static const std::vector<std::string> vocab = {
        "<pad>", "push",  "reach",  "the",    "red",  "green", "blue",  "yellow",
        "purple", "orange", "cube",  "sphere", "ball", "block", "object", "and",
        "a",      "to",     "goal",  "pad",    "target", "move", "arm",  "table",
        "left",   "right",  "front", "back",   "up",   "down",  "near",  "far"};
    return vocab;
}

std::vector<int> tokenize(const std::string& text) {
    static std::unordered_map<std::string, int> index;
    if (index.empty())
        for (size_t i = 0; i < vocabulary().size(); ++i) index[vocabulary()[i]] = static_cast<int>(i);
    std::vector<int> ids;
    std::istringstream is(text);
    std::string word;
    while (is >> word) {
        auto it = index.find(word);
        if (it == index.end())
            throw std::invalid_argument("tokenize: word '" + word + "' not in vocabulary");
        ids.push_back(it->second);
    }
    return ids;
}

std::string detokenize(const std::vector<int>& ids) {
    std::string out;
    for (int id : ids) {
        if (id < 0 || id >= static_cast<int>(vocabulary().size()))
            throw std::invalid_argument("detokenize: id " + std::to_string(id) +
                                        " outside vocabulary");
        if (!out.empty()) out += ' ';
        out += vocabulary()[id];
    }
    return out;
}

std::string instruction_text(const std::string& verb, const SceneObject& target) {
    return verb + " the " + color_name(target.color_id) + " " + kind_name(target.kind);
}

// ---- camera rig ----

geom::CameraParams rig_camera(int index) {
    const geom::Vec3 focus{0.5, 0.5, 0.06};
    const geom::Vec3 up{0, 0, 1};
    const double fov = 50.0 * M_PI / 180.0;
    switch (index) {
        case 0: return geom::look_at({0.5, -0.38, 0.42}, focus, up, fov);
        case 1: return geom::look_at({-0.22, -0.18, 0.50}, focus, up, fov);
        case 2: return geom::look_at({1.22, -0.18, 0.50}, focus, up, fov);
        case 3: return geom::look_at({0.5, 0.38, 1.05}, {0.5, 0.5, 0.0}, up, fov);
        default:
            throw std::invalid_argument("rig_camera: index " + std::to_string(index) +
                                        " outside rig of " + std::to_string(kMaxViews));
    }
}

}  // namespace gp3::scenegen
