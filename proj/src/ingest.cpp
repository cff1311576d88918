// Copyright (c) 2026 the gsps authors.
// SPDX-License-Identifier: Apache-2.0

#include "gsps/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "gsps/errors.hpp"
#include "gsps/image_io.hpp"
#include "gsps/metrics.hpp"

namespace fs = std::filesystem;

namespace gsps {

void ImageStack::rebuild_mask_plane() {
    mask_plane = ImageD(mask.width, mask.height, 0.0);
    for (size_t i = 0; i < mask.data.size(); ++i)
        mask_plane.data[i] = mask.data[i] ? 1.0 : 0.0;
}

void ImageStack::validate(int min_images) const {
    if (count() < min_images)
        throw FormatError("image stack has " + std::to_string(count()) + " images, need at least " +
                          std::to_string(min_images));
    if (int(lights.size()) != count() || int(calibration.size()) != count())
        throw FormatError("light records do not match image count");
    if (mask.empty()) throw FormatError("empty mask");
    for (int i = 0; i < count(); ++i) {
        if (!images[size_t(i)].r.same_size(mask))
            throw FormatError("image " + std::to_string(i) + " resolution differs from mask");
        if (!light_valid(lights[size_t(i)]))
            throw FormatError("light " + std::to_string(i) + " is invalid");
    }
    if (count_true(mask) == 0) throw FormatError("empty foreground");
    if (gt_normals) {
        if (!gt_normals->same_size(mask))
            throw FormatError("gt normal map resolution differs from mask");
        for (int y = 0; y < mask.height; ++y)
            for (int x = 0; x < mask.width; ++x)
                if (mask.at(x, y) && std::abs(norm(gt_normals->at(x, y)) - 1.0) > 1e-3)
                    throw FormatError("gt normal at (" + std::to_string(x) + "," +
                                      std::to_string(y) + ") is not unit length");
    }
}

ImageD ImageStack::luminance(int index) const {
    const ColorImage& im = images[size_t(index)];
    ImageD out(im.width(), im.height());
    for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = (im.r.data[i] + im.g.data[i] + im.b.data[i]) / 3.0;
    return out;
}

namespace {

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw LoadError("missing file: " + p.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

std::vector<Vec3> read_triples(const fs::path& p) {
    std::vector<Vec3> rows;
    for (const std::string& line : read_lines(p)) {
        std::istringstream ss(line);
        Vec3 v;
        if (!(ss >> v.x >> v.y >> v.z))
            throw FormatError(p.string() + ": cannot parse row " + std::to_string(rows.size() + 1));
        rows.push_back(v);
    }
    return rows;
}

double srgb_to_linear(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

ColorImage decode_linear(const PngImage& png, bool srgb) {
    ColorImage img(png.width, png.height);
    const double inv = 1.0 / png.max_value();
    const size_t n = size_t(png.width) * png.height;
    for (size_t i = 0; i < n; ++i) {
        Vec3 v;
        if (png.channels == 3)
            v = {png.data[3 * i] * inv, png.data[3 * i + 1] * inv, png.data[3 * i + 2] * inv};
        else {
            double g = png.data[i] * inv;
            v = {g, g, g};
        }
        if (srgb) v = {srgb_to_linear(v.x), srgb_to_linear(v.y), srgb_to_linear(v.z)};
        img.r.data[i] = v.x;
        img.g.data[i] = v.y;
        img.b.data[i] = v.z;
    }
    return img;
}

}  // namespace

ImageStack load_diligent(const std::string& dir, const LoadOptions& opts) {
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw LoadError("not a directory: " + dir);

    const std::vector<std::string> names = read_lines(root / "filenames.txt");
    const std::vector<Vec3> dirs = read_triples(root / "light_directions.txt");
    const std::vector<Vec3> ints = read_triples(root / "light_intensities.txt");
    if (dirs.size() != names.size())
        throw FormatError("light_directions.txt has " + std::to_string(dirs.size()) +
                          " rows but filenames.txt lists " + std::to_string(names.size()) +
                          " images");
    if (ints.size() != names.size())
        throw FormatError("light_intensities.txt has " + std::to_string(ints.size()) +
                          " rows but filenames.txt lists " + std::to_string(names.size()) +
                          " images");

    ImageStack stack;

    const fs::path mask_path = root / "mask.png";
    if (!fs::exists(mask_path)) throw LoadError("missing file: " + mask_path.string());
    PngImage mask_png = read_png(mask_path.string());
    stack.mask = ImageU8(mask_png.width, mask_png.height, 0);
    const int half = mask_png.max_value() / 2;
    for (size_t i = 0; i < stack.mask.data.size(); ++i)
        stack.mask.data[i] = mask_png.data[i * size_t(mask_png.channels)] > half ? 1 : 0;
    if (count_true(stack.mask) == 0) throw FormatError("empty foreground");

    for (size_t i = 0; i < names.size(); ++i) {
        const fs::path p = root / names[i];
        if (!fs::exists(p)) throw LoadError("missing file: " + p.string());
        PngImage png = read_png(p.string());
        if (png.width != stack.mask.width || png.height != stack.mask.height)
            throw FormatError(names[i] + " resolution differs from mask.png");
        ColorImage img = decode_linear(png, opts.srgb);

        // Per-channel intensity normalization: Eq-style shading then
        // holds with unit light strength.
        const Vec3 cal = ints[i];
        for (int c = 0; c < 3; ++c) {
            const double k = cal[c];
            if (k > 0.0) {
                ImageD& plane = img.plane(c);
                for (double& v : plane.data) v /= k;
            }
        }
        stack.images.push_back(std::move(img));
        Light l;
        l.direction = normalized(dirs[i]);
        l.intensity = {1.0, 1.0, 1.0};
        stack.lights.push_back(l);
        stack.calibration.push_back(cal);
    }

    if (names.size() < 3)
        std::cerr << "warning: only " << names.size()
                  << " images; the least-squares baseline needs at least 3\n";

    // Ground truth, if shipped with the dataset.
    const fs::path ntxt = root / "normal.txt";
    if (fs::exists(ntxt)) {
        std::ifstream in(ntxt);
        ImageV3 gt(stack.mask.width, stack.mask.height);
        for (size_t i = 0; i < gt.data.size(); ++i)
            if (!(in >> gt.data[i].x >> gt.data[i].y >> gt.data[i].z))
                throw FormatError("normal.txt: expected " + std::to_string(gt.data.size()) +
                                  " rows of 3 values");
        for (Vec3& n : gt.data) {
            double l = norm(n);
            if (l > 1e-6) n = n / l;
        }
        stack.gt_normals = std::move(gt);
    } else {
        for (const char* cand : {"Normal_gt.png", "normal_gt.png"}) {
            const fs::path np = root / cand;
            if (fs::exists(np)) {
                stack.gt_normals = read_normal_png(np.string());
                break;
            }
        }
    }

    stack.rebuild_mask_plane();
    return stack;
}

AnalyticScene AnalyticScene::make(SynthShape shape, int resolution) {
    AnalyticScene s;
    s.shape = shape;
    s.resolution = resolution;
    switch (shape) {
        case SynthShape::Sphere:
            s.sphere_radius = 0.9;
            s.sphere_center = {0.0, 0.0, 0.0};
            s.has_plane = false;
            break;
        case SynthShape::Plane:
            s.sphere_radius = 0.0;
            s.has_plane = true;
            break;
        case SynthShape::SphereOverPlane:
            s.sphere_radius = 0.35;
            s.sphere_center = {0.0, 0.0, 0.5};
            s.has_plane = true;
            break;
    }
    return s;
}

Camera AnalyticScene::camera() const {
    return make_orthographic(resolution, resolution, 2.0 * half_extent / resolution,
                             {0.0, 0.0, camera_z});
}

Vec3 AnalyticScene::pixel_xy(int ix, int iy) const {
    const double pitch = 2.0 * half_extent / resolution;
    const double cx = resolution * 0.5, cy = resolution * 0.5;
    return {(ix + 0.5 - cx) * pitch, (cy - (iy + 0.5)) * pitch, 0.0};
}

bool AnalyticScene::inside(double x, double y) const {
    if (has_plane) return true;
    const double dx = x - sphere_center.x, dy = y - sphere_center.y;
    return dx * dx + dy * dy <= sphere_radius * sphere_radius;
}

double AnalyticScene::height(double x, double y) const {
    if (sphere_radius > 0.0) {
        const double dx = x - sphere_center.x, dy = y - sphere_center.y;
        const double q = sphere_radius * sphere_radius - dx * dx - dy * dy;
        if (q >= 0.0) return sphere_center.z + std::sqrt(q);
    }
    return plane_z;
}

Vec3 AnalyticScene::normal(double x, double y) const {
    if (sphere_radius > 0.0) {
        const double dx = x - sphere_center.x, dy = y - sphere_center.y;
        const double q = sphere_radius * sphere_radius - dx * dx - dy * dy;
        if (q >= 0.0) return Vec3{dx, dy, std::sqrt(q)} / sphere_radius;
    }
    return {0.0, 0.0, 1.0};
}

bool AnalyticScene::occluded(const Vec3& p, const Vec3& light_dir) const {
    if (sphere_radius <= 0.0) return false;
    const Vec3 oc = p - sphere_center;
    const double b = dot(oc, light_dir);
    const double c0 = dot(oc, oc) - sphere_radius * sphere_radius;
    const double disc = b * b - c0;
    if (disc <= 0.0) return false;
    const double sq = std::sqrt(disc);
    const double s1 = -b - sq;
    // Entering hit strictly in front of the origin; surface points of the
    // sphere itself (c0 ~ 0) only count when leaving through the far side.
    return s1 > 1e-9 || (c0 < -1e-12 && -b + sq > 1e-9);
}

ImageU8 AnalyticScene::foreground_mask() const {
    ImageU8 m(resolution, resolution, 0);
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            Vec3 p = pixel_xy(x, y);
            m.at(x, y) = inside(p.x, p.y) ? 1 : 0;
        }
    return m;
}

ImageD AnalyticScene::depth_map() const {
    ImageD d(resolution, resolution, std::numeric_limits<double>::infinity());
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            Vec3 p = pixel_xy(x, y);
            if (inside(p.x, p.y)) d.at(x, y) = camera_z - height(p.x, p.y);
        }
    return d;
}

ImageV3 AnalyticScene::normal_map() const {
    ImageV3 n(resolution, resolution);
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            Vec3 p = pixel_xy(x, y);
            if (inside(p.x, p.y)) n.at(x, y) = normal(p.x, p.y);
        }
    return n;
}

ImageU8 AnalyticScene::cast_shadow_mask(const Light& light) const {
    ImageU8 m(resolution, resolution, 0);
    for (int y = 0; y < resolution; ++y)
        for (int x = 0; x < resolution; ++x) {
            Vec3 p = pixel_xy(x, y);
            if (!inside(p.x, p.y)) continue;
            p.z = height(p.x, p.y);
            m.at(x, y) = occluded(p, light.direction) ? 1 : 0;
        }
    return m;
}

std::vector<Light> synth_lights(int count, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> elev(20.0, 45.0);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    std::vector<Light> lights;
    const double deg = M_PI / 180.0;
    for (int k = 0; k < count; ++k) {
        const double theta = elev(rng) * deg;  // angle from +z
        const double phi = 2.0 * M_PI * k / count + jitter(rng);
        Light l;
        l.direction = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi),
                       std::cos(theta)};
        lights.push_back(l);
    }
    return lights;
}

ImageStack synth_scene(SynthShape shape, const std::vector<Light>& lights, int resolution) {
    if (resolution < 16) throw ParamError("resolution must be at least 16");
    for (size_t i = 0; i < lights.size(); ++i)
        if (!light_valid(lights[i]))
            throw ParamError("light " + std::to_string(i) + " is invalid");

    const AnalyticScene scene = AnalyticScene::make(shape, resolution);
    ImageStack stack;
    stack.mask = scene.foreground_mask();
    stack.gt_normals = scene.normal_map();

    for (const Light& light : lights) {
        ColorImage img(resolution, resolution);
        for (int y = 0; y < resolution; ++y)
            for (int x = 0; x < resolution; ++x) {
                if (!stack.mask.at(x, y)) continue;
                Vec3 p = scene.pixel_xy(x, y);
                const Vec3 n = scene.normal(p.x, p.y);
                p.z = scene.height(p.x, p.y);
                double s = std::max(0.0, dot(light.direction, n));
                if (s > 0.0 && scene.occluded(p, light.direction)) s = 0.0;
                img.set(x, y, {s, s, s});  // unit albedo
            }
        stack.images.push_back(std::move(img));
        Light unit = light;
        unit.intensity = {1.0, 1.0, 1.0};
        stack.lights.push_back(unit);
        stack.calibration.push_back(light.intensity);
    }
    stack.rebuild_mask_plane();
    return stack;
}

SplatScene init_scene(const ImageStack& stack, const Camera& camera) {
    if (camera.width != stack.width() || camera.height != stack.height())
        throw ParamError("camera resolution does not match the image stack");

    SplatScene scene;
    scene.camera = camera;
    const Vec3 tu = camera.orientation * Vec3{1.0, 0.0, 0.0};
    const Vec3 tv = camera.orientation * Vec3{0.0, 1.0, 0.0};

    for (int y = 0; y < stack.height(); ++y)
        for (int x = 0; x < stack.width(); ++x) {
            if (!stack.mask.at(x, y)) continue;
            const Camera::Ray ray = camera.pixel_ray(x + 0.5, y + 0.5);
            if (std::abs(ray.dir.z) < 1e-12)
                throw ParamError("camera rays are parallel to the z=0 initialization plane");
            const double t = -ray.origin.z / ray.dir.z;
            Vec3 center = ray.origin + ray.dir * t;
            center.z = 0.0;

            SurfelGaussian g;
            g.center = center;
            g.tangent_u = tu;
            g.tangent_v = tv;
            g.scale_u = g.scale_v = 0.5 * camera.footprint_pitch(t);
            g.opacity = 0.5;
            Vec3 albedo{0.0, 0.0, 0.0};
            for (const ColorImage& im : stack.images) {
                const Vec3 v = im.at(x, y);
                albedo.x = std::max(albedo.x, v.x);
                albedo.y = std::max(albedo.y, v.y);
                albedo.z = std::max(albedo.z, v.z);
            }
            g.albedo = albedo;
            scene.gaussians.push_back(g);
        }
    scene.densify_stats.resize(scene.gaussians.size());
    return scene;
}

SplatScene analytic_splat_scene(const AnalyticScene& ascene) {
    SplatScene scene;
    scene.camera = ascene.camera();
    const double pitch = scene.camera.pixel_pitch;
    for (int y = 0; y < ascene.resolution; ++y)
        for (int x = 0; x < ascene.resolution; ++x) {
            Vec3 p = ascene.pixel_xy(x, y);
            if (!ascene.inside(p.x, p.y)) continue;
            const Vec3 n = ascene.normal(p.x, p.y);
            p.z = ascene.height(p.x, p.y);

            Vec3 up = std::abs(n.y) < 0.99 ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0};
            const Vec3 tu = normalized(cross(up, n));
            const Vec3 tv = cross(n, tu);  // tu x tv == n

            SurfelGaussian g;
            g.center = p;
            g.tangent_u = tu;
            g.tangent_v = tv;
            // widen on slopes so the tilted footprint still covers a pixel
            g.scale_u = g.scale_v = 0.5 * pitch / std::max(n.z, 0.3);
            g.opacity = 1.0;
            scene.gaussians.push_back(g);
        }
    scene.densify_stats.resize(scene.gaussians.size());
    return scene;
}

namespace {

std::string zero_pad(int v, int width) {
    std::string s = std::to_string(v);
    while (int(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

}  // namespace

void save_diligent(const std::string& dir, const ImageStack& stack,
                   const AnalyticScene* oracle) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) throw LoadError("cannot create output directory " + dir);

    std::ofstream names(root / "filenames.txt");
    std::ofstream dirs(root / "light_directions.txt");
    std::ofstream ints(root / "light_intensities.txt");
    if (!names || !dirs || !ints) throw LoadError("cannot write into " + dir);
    dirs.precision(12);
    ints.precision(12);

    const int w = stack.width(), h = stack.height();
    std::vector<uint16_t> buf(size_t(w) * h * 3);
    for (int i = 0; i < stack.count(); ++i) {
        const std::string name = zero_pad(i + 1, 3) + ".png";
        names << name << "\n";
        const Vec3 d = stack.lights[size_t(i)].direction;
        const Vec3 c = stack.calibration[size_t(i)];
        dirs << d.x << " " << d.y << " " << d.z << "\n";
        ints << c.x << " " << c.y << " " << c.z << "\n";

        const ColorImage& im = stack.images[size_t(i)];
        for (size_t p = 0; p < size_t(w) * h; ++p) {
            const Vec3 v{im.r.data[p] * c.x, im.g.data[p] * c.y, im.b.data[p] * c.z};
            for (int ch = 0; ch < 3; ++ch) {
                double q = std::clamp(v[ch], 0.0, 1.0);
                buf[3 * p + size_t(ch)] = uint16_t(std::lround(q * 65535.0));
            }
        }
        write_png16((root / name).string(), w, h, 3, buf.data());
    }

    std::vector<uint8_t> mbuf(size_t(w) * h);
    for (size_t p = 0; p < mbuf.size(); ++p) mbuf[p] = stack.mask.data[p] ? 255 : 0;
    write_png8((root / "mask.png").string(), w, h, 1, mbuf.data());

    if (stack.gt_normals)
        write_normal_png((root / "normal_gt.png").string(), *stack.gt_normals, stack.mask, 16);

    if (oracle) {
        write_pfm((root / "depth_gt.pfm").string(), oracle->depth_map());
        if (oracle->shape == SynthShape::SphereOverPlane) {
            for (int i = 0; i < stack.count(); ++i) {
                const ImageU8 sm = oracle->cast_shadow_mask(stack.lights[size_t(i)]);
                std::vector<uint8_t> sbuf(sm.data.size());
                for (size_t p = 0; p < sbuf.size(); ++p) sbuf[p] = sm.data[p] ? 255 : 0;
                write_png8((root / ("shadow_gt_" + zero_pad(i, 3) + ".png")).string(), w, h, 1,
                           sbuf.data());
            }
        }
    }
}

}  // namespace gsps
