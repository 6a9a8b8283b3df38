#pragma once

#include <vector>

#include "gp3/geometry.hpp"
#include "gp3/scene.hpp"

namespace gp3::scenegen {

struct ViewRender {
    int h = 0, w = 0;
    std::vector<double> image;    // h*w*3, values in [0,1]
    std::vector<double> depth_gt; // h*w, camera-frame z, 0 where nothing was hit
    std::vector<int> hit_ids;     // h*w, object index or -1 (diagnostic, not serialized)
    geom::CameraParams camera;
};

struct Resolution {
    int h = 32, w = 32;
};

// Analytic ray cast against spheres / boxes / decoy quads with flat Lambertian
// shading and a fixed directional light. Deterministic; sweeping rows in
// parallel when the kernel switch is on does not change any byte.
ViewRender render_view(const Scene& scene, const geom::CameraParams& camera, Resolution res);

struct PointCloud {
    std::vector<geom::Vec3> points;
};

// One world-frame point per pixel with depth > 0.
PointCloud unproject_depth(const ViewRender& view);

// signed distance to the nearest scene surface (tests & invariants)
double scene_sdf(const Scene& scene, const geom::Vec3& p);

}  // namespace gp3::scenegen
