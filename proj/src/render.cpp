#include "gp3/render.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "gp3/kernels.hpp"

namespace gp3::scenegen {

namespace {

constexpr double kAmbient = 0.35;
constexpr double kDiffuse = 0.65;
constexpr double kTMin = 1e-9;

const geom::Vec3 kLightDir = geom::Vec3{-0.35, 0.25, 1.0}.normalized();

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    geom::Vec3 normal;
    int object = -1;
};

bool intersect_sphere(const geom::Ray& ray, const geom::Vec3& c, double r, double& t,
                      geom::Vec3& n) {
    const geom::Vec3 oc = ray.origin - c;
    const double a = ray.dir.dot(ray.dir);
    const double b = 2.0 * oc.dot(ray.dir);
    const double cc = oc.dot(oc) - r * r;
    const double disc = b * b - 4 * a * cc;
    if (disc < 0) return false;
    const double sq = std::sqrt(disc);
    double tt = (-b - sq) / (2 * a);
    if (tt < kTMin) tt = (-b + sq) / (2 * a);
    if (tt < kTMin) return false;
    t = tt;
    n = ((ray.origin + ray.dir * tt) - c).normalized();
    return true;
}

bool intersect_box(const geom::Ray& ray, const geom::Vec3& c, double he, double& t,
                   geom::Vec3& n) {
    double tlo = -std::numeric_limits<double>::infinity();
    double thi = std::numeric_limits<double>::infinity();
    int axis_lo = -1;
    const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
    const double d[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
    const double ctr[3] = {c.x, c.y, c.z};
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < ctr[a] - he || o[a] > ctr[a] + he) return false;
            continue;
        }
        double t0 = (ctr[a] - he - o[a]) / d[a];
        double t1 = (ctr[a] + he - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tlo) {
            tlo = t0;
            axis_lo = a;
        }
        thi = std::min(thi, t1);
        if (tlo > thi) return false;
    }
    if (tlo < kTMin) return false;  // inside or behind
    t = tlo;
    const geom::Vec3 p = ray.origin + ray.dir * t;
    geom::Vec3 nn{0, 0, 0};
    const double pv[3] = {p.x, p.y, p.z};
    const double sign = pv[axis_lo] > ctr[axis_lo] ? 1.0 : -1.0;
    if (axis_lo == 0) nn.x = sign;
    if (axis_lo == 1) nn.y = sign;
    if (axis_lo == 2) nn.z = sign;
    n = nn;
    return true;
}

double shade_channel(double albedo, const geom::Vec3& n) {
    return albedo * (kAmbient + kDiffuse * std::max(0.0, n.dot(kLightDir)));
}

void shade(int color_id, const geom::Vec3& n, double* rgb) {
    const auto c = color_rgb(color_id);
    for (int k = 0; k < 3; ++k) rgb[k] = shade_channel(c[k], n);
}

bool intersect_object(const geom::Ray& ray, const SceneObject& obj, double& t, geom::Vec3& n) {
    switch (obj.kind) {
        case ObjectKind::Sphere:
            return intersect_sphere(ray, obj.center, obj.half_extent, t, n);
        case ObjectKind::Cube:
            return intersect_box(ray, obj.center, obj.half_extent, t, n);
        case ObjectKind::FlatDecoy: {
            if (std::abs(ray.dir.z) < 1e-15) return false;
            const double tt = (obj.center.z - ray.origin.z) / ray.dir.z;
            if (tt < kTMin) return false;
            const geom::Vec3 p = ray.origin + ray.dir * tt;
            if (std::abs(p.x - obj.center.x) > obj.rect_hx ||
                std::abs(p.y - obj.center.y) > obj.rect_hy)
                return false;
            t = tt;
            n = {0, 0, 1};
            return true;
        }
    }
    return false;
}

// Color printed at plane point p: re-cast from the print camera through p
// against the virtual object; misses show the background the print captured.
void decoy_color(const SceneObject& decoy, const geom::Vec3& p, double* rgb) {
    const PrintSpec& pr = *decoy.print;
    geom::Ray ray;
    ray.origin = pr.camera.center();
    ray.dir = p - ray.origin;
    SceneObject virt;
    virt.kind = pr.kind;
    virt.center = pr.center;
    virt.half_extent = pr.half_extent;
    virt.color_id = pr.color_id;
    double t;
    geom::Vec3 n;
    if (intersect_object(ray, virt, t, n)) {
        shade(pr.color_id, n, rgb);
    } else {
        const auto bg = background_rgb();
        for (int k = 0; k < 3; ++k) rgb[k] = bg[k];
    }
}

void render_pixel(const Scene& scene, const geom::CameraParams& cam, Resolution res, int ix,
                  int iy, double* rgb, double* depth, int* hit_id) {
    const geom::Ray ray = geom::pixel_ray(cam, res.h, res.w, ix, iy);
    Hit best;
    for (size_t i = 0; i < scene.objects.size(); ++i) {
        double t;
        geom::Vec3 n;
        if (intersect_object(ray, scene.objects[i], t, n) && t < best.t) {
            best.t = t;
            best.normal = n;
            best.object = static_cast<int>(i);
        }
    }
    // arm marker rendered as a small sphere
    if (scene.arm_tip) {
        double t;
        geom::Vec3 n;
        if (intersect_sphere(ray, *scene.arm_tip, 0.03, t, n) && t < best.t) {
            best.t = t;
            best.normal = n;
            best.object = -2;
        }
    }
    if (best.object == -1) {
        const auto bg = background_rgb();
        for (int k = 0; k < 3; ++k) rgb[k] = bg[k];
        *depth = 0.0;
        *hit_id = -1;
        return;
    }
    *depth = best.t;  // ray parameter equals camera z
    *hit_id = best.object;
    if (best.object == -2) {
        shade(kNumColors, best.normal, rgb);  // arm marker color
        return;
    }
    const SceneObject& obj = scene.objects[best.object];
    if (obj.kind == ObjectKind::FlatDecoy) {
        decoy_color(obj, ray.origin + ray.dir * best.t, rgb);
    } else {
        shade(obj.color_id, best.normal, rgb);
    }
}

}  // namespace

ViewRender render_view(const Scene& scene, const geom::CameraParams& camera, Resolution res) {
    if (!camera.valid())
        throw std::invalid_argument("render_view: invalid camera (unit quaternion with w >= 0 "
                                    "and fov in (0, pi) required)");
    if (res.h <= 0 || res.w <= 0) throw std::invalid_argument("render_view: empty resolution");
    ViewRender out;
    out.h = res.h;
    out.w = res.w;
    out.camera = camera;
    out.image.resize(static_cast<size_t>(res.h) * res.w * 3);
    out.depth_gt.resize(static_cast<size_t>(res.h) * res.w);
    out.hit_ids.resize(static_cast<size_t>(res.h) * res.w);

    const bool par = kernels::parallel_enabled() && !kernels::in_parallel_region();
#pragma omp parallel for schedule(static) if (par)
    for (int iy = 0; iy < res.h; ++iy) {
        for (int ix = 0; ix < res.w; ++ix) {
            const size_t pix = static_cast<size_t>(iy) * res.w + ix;
            render_pixel(scene, camera, res, ix, iy, out.image.data() + pix * 3,
                         out.depth_gt.data() + pix, out.hit_ids.data() + pix);
        }
    }
    return out;
}

PointCloud unproject_depth(const ViewRender& view) {
    PointCloud cloud;
    for (int iy = 0; iy < view.h; ++iy)
        for (int ix = 0; ix < view.w; ++ix) {
            const double d = view.depth_gt[static_cast<size_t>(iy) * view.w + ix];
            if (d > 0.0)
                cloud.points.push_back(geom::unproject_pixel(view.camera, view.h, view.w, ix, iy, d));
        }
    return cloud;
}

double scene_sdf(const Scene& scene, const geom::Vec3& p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : scene.objects) {
        double d;
        switch (o.kind) {
            case ObjectKind::Sphere:
                d = (p - o.center).norm() - o.half_extent;
                break;
            case ObjectKind::Cube: {
                const geom::Vec3 q{std::abs(p.x - o.center.x) - o.half_extent,
                                   std::abs(p.y - o.center.y) - o.half_extent,
                                   std::abs(p.z - o.center.z) - o.half_extent};
                const geom::Vec3 qp{std::max(q.x, 0.0), std::max(q.y, 0.0), std::max(q.z, 0.0)};
                d = qp.norm() + std::min(std::max(q.x, std::max(q.y, q.z)), 0.0);
                break;
            }
            case ObjectKind::FlatDecoy: {
                const double dx = std::max(std::abs(p.x - o.center.x) - o.rect_hx, 0.0);
                const double dy = std::max(std::abs(p.y - o.center.y) - o.rect_hy, 0.0);
                const double dz = p.z - o.center.z;
                d = std::sqrt(dx * dx + dy * dy + dz * dz);
                break;
            }
        }
        best = std::min(best, d);
    }
    if (scene.arm_tip) best = std::min(best, (p - *scene.arm_tip).norm() - 0.03);
    return best;
}

}  // namespace gp3::scenegen
