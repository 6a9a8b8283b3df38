#include "gp3/geometry.hpp"

#include <stdexcept>

namespace gp3::geom {

Vec3 Quat::rotate(const Vec3& v) const {
    // q v q* expanded
    const Vec3 u{x, y, z};
    const Vec3 t = u.cross(v) * 2.0;
    return v + t * w + u.cross(t);
}

std::array<double, 9> Quat::to_matrix() const {
    const double xx = x * x, yy = y * y, zz = z * z;
    const double xy = x * y, xz = x * z, yz = y * z;
    const double wx = w * x, wy = w * y, wz = w * z;
    return {1 - 2 * (yy + zz), 2 * (xy - wz),     2 * (xz + wy),
            2 * (xy + wz),     1 - 2 * (xx + zz), 2 * (yz - wx),
            2 * (xz - wy),     2 * (yz + wx),     1 - 2 * (xx + yy)};
}

Quat Quat::from_matrix(const std::array<double, 9>& r) {
    Quat q;
    const double trace = r[0] + r[4] + r[8];
    if (trace > 0.0) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (r[7] - r[5]) / s;
        q.y = (r[2] - r[6]) / s;
        q.z = (r[3] - r[1]) / s;
    } else if (r[0] > r[4] && r[0] > r[8]) {
        const double s = std::sqrt(1.0 + r[0] - r[4] - r[8]) * 2.0;
        q.w = (r[7] - r[5]) / s;
        q.x = 0.25 * s;
        q.y = (r[1] + r[3]) / s;
        q.z = (r[2] + r[6]) / s;
    } else if (r[4] > r[8]) {
        const double s = std::sqrt(1.0 + r[4] - r[0] - r[8]) * 2.0;
        q.w = (r[2] - r[6]) / s;
        q.x = (r[1] + r[3]) / s;
        q.y = 0.25 * s;
        q.z = (r[5] + r[7]) / s;
    } else {
        const double s = std::sqrt(1.0 + r[8] - r[0] - r[4]) * 2.0;
        q.w = (r[3] - r[1]) / s;
        q.x = (r[2] + r[6]) / s;
        q.y = (r[5] + r[7]) / s;
        q.z = 0.25 * s;
    }
    return q.normalized();
}

CameraParams look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_v) {
    const Vec3 zc = (target - eye).normalized();  // forward
    Vec3 xc = zc.cross(up);
    if (xc.norm() < 1e-12)
        throw std::invalid_argument("look_at: view direction parallel to up vector");
    xc = xc.normalized();
    const Vec3 yc = zc.cross(xc);  // image-down
    const std::array<double, 9> r = {xc.x, xc.y, xc.z, yc.x, yc.y, yc.z, zc.x, zc.y, zc.z};
    CameraParams cam;
    cam.rotation_q = Quat::from_matrix(r);
    cam.translation = -cam.rotation_q.rotate(eye);
    cam.fov_v = fov_v;
    return cam;
}

PixelHit project_point(const CameraParams& cam, int h, int w, const Vec3& p_world) {
    const Vec3 pc = cam.to_camera(p_world);
    PixelHit hit;
    hit.depth = pc.z;
    hit.in_front = pc.z > 0.0;
    if (!hit.in_front) return hit;
    const double f = focal_pixels(cam.fov_v, h);
    hit.u = 0.5 * w + f * pc.x / pc.z;
    hit.v = 0.5 * h + f * pc.y / pc.z;
    return hit;
}

Ray pixel_ray(const CameraParams& cam, int h, int w, int ix, int iy) {
    const double f = focal_pixels(cam.fov_v, h);
    const Vec3 dir_cam{(ix + 0.5 - 0.5 * w) / f, (iy + 0.5 - 0.5 * h) / f, 1.0};
    Ray ray;
    ray.origin = cam.center();
    ray.dir = cam.rotation_q.conjugate().rotate(dir_cam);
    return ray;
}

Vec3 unproject_pixel(const CameraParams& cam, int h, int w, int ix, int iy, double depth) {
    const double f = focal_pixels(cam.fov_v, h);
    const Vec3 pc{depth * (ix + 0.5 - 0.5 * w) / f, depth * (iy + 0.5 - 0.5 * h) / f, depth};
    return cam.to_world(pc);
}

}  // namespace gp3::geom
