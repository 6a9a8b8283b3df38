#pragma once

#include <array>
#include <cmath>

namespace gp3::geom {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

// Unit quaternion, canonical sign w >= 0.
struct Quat {
    double w = 1, x = 0, y = 0, z = 0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
    Quat normalized() const {
        const double n = norm();
        Quat q{w / n, x / n, y / n, z / n};
        if (q.w < 0) {
            q.w = -q.w;
            q.x = -q.x;
            q.y = -q.y;
            q.z = -q.z;
        }
        return q;
    }
    // rotation of v by this quaternion
    Vec3 rotate(const Vec3& v) const;
    Quat conjugate() const { return {w, -x, -y, -z}; }

    std::array<double, 9> to_matrix() const;  // row-major
    static Quat from_matrix(const std::array<double, 9>& r);
};

// Pinhole camera, world -> camera map x_cam = R x_world + t. Camera frame:
// +z forward, +x right, +y down (image rows grow downward). Square pixels,
// principal point at the image center.
struct CameraParams {
    Quat rotation_q;
    Vec3 translation;
    double fov_v = 1.0;  // vertical field of view, radians, (0, pi)

    bool valid() const {
        return std::abs(rotation_q.norm() - 1.0) <= 1e-9 && rotation_q.w >= 0.0 &&
               fov_v > 0.0 && fov_v < M_PI;
    }

    Vec3 to_camera(const Vec3& p_world) const {
        return rotation_q.rotate(p_world) + translation;
    }
    Vec3 to_world(const Vec3& p_cam) const {
        return rotation_q.conjugate().rotate(p_cam - translation);
    }
    Vec3 center() const { return rotation_q.conjugate().rotate(-translation); }

    // the 8-float encoding [qw qx qy qz tx ty tz fov]
    std::array<double, 8> to_g() const {
        return {rotation_q.w, rotation_q.x, rotation_q.y, rotation_q.z,
                translation.x, translation.y, translation.z, fov_v};
    }
    static CameraParams from_g(const std::array<double, 8>& g) {
        CameraParams c;
        c.rotation_q = Quat{g[0], g[1], g[2], g[3]}.normalized();
        c.translation = {g[4], g[5], g[6]};
        c.fov_v = g[7];
        return c;
    }
};

CameraParams look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_v);

// focal length in pixels for an image of height h
inline double focal_pixels(double fov_v, int h) {
    return 0.5 * static_cast<double>(h) / std::tan(0.5 * fov_v);
}

struct PixelHit {
    double u = 0, v = 0;   // pixel coordinates (continuous; pixel i covers [i, i+1))
    double depth = 0;      // camera-frame z
    bool in_front = false;
};

PixelHit project_point(const CameraParams& cam, int h, int w, const Vec3& p_world);

// Ray through the center of pixel (ix, iy); direction has camera z = 1, so the
// ray parameter equals camera depth.
struct Ray {
    Vec3 origin;
    Vec3 dir;
};
Ray pixel_ray(const CameraParams& cam, int h, int w, int ix, int iy);

// world point for a pixel with the given camera depth
Vec3 unproject_pixel(const CameraParams& cam, int h, int w, int ix, int iy, double depth);

}  // namespace gp3::geom
