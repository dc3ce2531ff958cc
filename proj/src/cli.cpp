#include "eshlab/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string_view>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "eshlab/fields.hpp"
#include "eshlab/lab.hpp"

namespace eshlab {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a(std::string_view s, std::uint64_t h) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_hash(std::uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

// Single spaces between tokens, so equivalent spellings hash identically.
std::string normalize_value(const std::string& v) {
    std::istringstream in(v);
    std::string tok, out;
    while (in >> tok) {
        if (!out.empty()) out += ' ';
        out += tok;
    }
    return out;
}

std::string qualify(const std::string& section, const std::string& key) {
    return section.empty() ? key : section + "." + key;
}

double parse_real_or_throw(const std::string& where, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw ConfigError(where, "expected a real number, got '" + text + "'");
    return v;
}

long long parse_int_or_throw(const std::string& where, const std::string& text) {
    const std::string t = trim(text);
    long long v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || p != t.data() + t.size())
        throw ConfigError(where, "expected an integer, got '" + text + "'");
    return v;
}

std::vector<double> parse_reals_or_throw(const std::string& where, const std::string& text,
                                         std::size_t count) {
    std::istringstream in(text);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_real_or_throw(where, tok));
    if (out.size() != count)
        throw ConfigError(where, "expected " + std::to_string(count) + " reals, got " +
                                     std::to_string(out.size()));
    return out;
}

Vec3 parse_vec3_or_throw(const std::string& where, const std::string& text) {
    auto v = parse_reals_or_throw(where, text, 3);
    return {v[0], v[1], v[2]};
}

Mat3 rotation_zyx(const Vec3& angles) {
    return (Eigen::AngleAxisd(angles[0], Vec3::UnitZ()) *
            Eigen::AngleAxisd(angles[1], Vec3::UnitY()) *
            Eigen::AngleAxisd(angles[2], Vec3::UnitX()))
        .toRotationMatrix();
}

struct RawEntry {
    std::string section;
    std::string key;
    std::string value;
    bool consumed = false;
};

std::vector<RawEntry> tokenize(const std::string& text) {
    std::vector<RawEntry> entries;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(lineno), "malformed section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            if (section.empty())
                throw ConfigError("line " + std::to_string(lineno), "empty section name");
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno), "expected 'key = value'");
        RawEntry e;
        e.section = section;
        e.key = trim(std::string_view(t).substr(0, eq));
        e.value = trim(std::string_view(t).substr(eq + 1));
        if (e.key.empty()) throw ConfigError("line " + std::to_string(lineno), "empty key");
        if (e.value.empty())
            throw ConfigError(qualify(e.section, e.key), "empty value");
        for (const RawEntry& prev : entries)
            if (prev.section == e.section && prev.key == e.key)
                throw ConfigError(qualify(e.section, e.key), "duplicate key");
        entries.push_back(std::move(e));
    }
    return entries;
}

class ConfigReader {
public:
    explicit ConfigReader(std::vector<RawEntry> entries) : entries_(std::move(entries)) {}

    bool has_section(const std::string& section) const {
        for (const RawEntry& e : entries_)
            if (e.section == section) return true;
        return false;
    }

    std::optional<std::string> take(const std::string& section, const std::string& key) {
        for (RawEntry& e : entries_) {
            if (e.section == section && e.key == key) {
                e.consumed = true;
                return e.value;
            }
        }
        return std::nullopt;
    }

    std::string require(const std::string& section, const std::string& key) {
        if (auto v = take(section, key)) return *v;
        throw ConfigError(qualify(section, key), "missing required key");
    }

    std::optional<double> take_real(const std::string& section, const std::string& key) {
        auto v = take(section, key);
        if (!v) return std::nullopt;
        return parse_real_or_throw(qualify(section, key), *v);
    }

    double require_real(const std::string& section, const std::string& key) {
        return parse_real_or_throw(qualify(section, key), require(section, key));
    }

    std::optional<long long> take_int(const std::string& section, const std::string& key) {
        auto v = take(section, key);
        if (!v) return std::nullopt;
        return parse_int_or_throw(qualify(section, key), *v);
    }

    std::optional<Vec3> take_vec3(const std::string& section, const std::string& key) {
        auto v = take(section, key);
        if (!v) return std::nullopt;
        return parse_vec3_or_throw(qualify(section, key), *v);
    }

    Vec3 require_vec3(const std::string& section, const std::string& key) {
        return parse_vec3_or_throw(qualify(section, key), require(section, key));
    }

    // First unconsumed key is a config error: strict parsing.
    void finish() const {
        for (const RawEntry& e : entries_)
            if (!e.consumed) throw ConfigError(qualify(e.section, e.key), "unknown key");
    }

    // Canonical hash input: every consumed key except artifact naming and the
    // seed (the effective seed is appended separately so --seed overrides
    // participate).
    std::vector<std::string> semantic_lines() const {
        std::vector<std::string> lines;
        for (const RawEntry& e : entries_) {
            if (e.section == "output") continue;
            if (e.section.empty() && e.key == "seed") continue;
            lines.push_back(qualify(e.section, e.key) + "=" + normalize_value(e.value));
        }
        std::sort(lines.begin(), lines.end());
        return lines;
    }

private:
    std::vector<RawEntry> entries_;
};

InclusionShape parse_primitive(ConfigReader& r, const std::string& sec, const std::string& kind) {
    try {
        if (kind == "ellipsoid") {
            Vec3 center = r.take_vec3(sec, "center").value_or(Vec3::Zero());
            Vec3 axes = r.require_vec3(sec, "semi_axes");
            Mat3 rot = Mat3::Identity();
            if (auto a = r.take_vec3(sec, "rotation_zyx")) rot = rotation_zyx(*a);
            return make_ellipsoid(center, axes, rot);
        }
        if (kind == "box") {
            Vec3 center = r.take_vec3(sec, "center").value_or(Vec3::Zero());
            return make_box(center, r.require_vec3(sec, "half_extents"));
        }
        if (kind == "superellipsoid") {
            Vec3 center = r.take_vec3(sec, "center").value_or(Vec3::Zero());
            Vec3 axes = r.require_vec3(sec, "semi_axes");
            double p = r.require_real(sec, "exponent");
            return make_superellipsoid(center, axes, p);
        }
        if (kind == "mask") {
            return make_mask_shape(read_mask(r.require(sec, "path")));
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(sec, e.what());
    }
    throw ConfigError(sec + ".kind", "unknown shape kind '" + kind + "'");
}

InclusionShape parse_shape(ConfigReader& r, const std::string& sec) {
    const std::string kind = trim(r.require(sec, "kind"));
    if (kind != "difference") return parse_primitive(r, sec, kind);
    for (const char* sub : {".outer", ".inner"})
        if (!r.has_section(sec + sub))
            throw ConfigError(sec + sub, "difference shapes need [" + sec + sub + "]");
    const std::string outer_kind = trim(r.require(sec + ".outer", "kind"));
    const std::string inner_kind = trim(r.require(sec + ".inner", "kind"));
    if (outer_kind == "difference" || inner_kind == "difference")
        throw ConfigError(sec + ".outer.kind", "nested difference shapes are not supported");
    InclusionShape outer = parse_primitive(r, sec + ".outer", outer_kind);
    InclusionShape inner = parse_primitive(r, sec + ".inner", inner_kind);
    try {
        return make_difference(std::move(outer), std::move(inner));
    } catch (const std::exception& e) {
        throw ConfigError(sec, e.what());
    }
}

bool uses_spectral_solver(Command c) {
    return c == Command::Field || c == Command::Uniformity || c == Command::Appendix;
}

bool uses_k_pair(Command c) {
    return c == Command::Theorem1 || c == Command::Theorem2 || c == Command::Flux ||
           c == Command::SpecialMaterial;
}

bool uses_grid(Command c) { return c != Command::Flux && c != Command::SpecialMaterial; }

bool produces_mask_dump(Command c) {
    return c == Command::Field || c == Command::Uniformity || c == Command::Potential ||
           c == Command::ShapeTest;
}

LameMaterial parse_material(ConfigReader& r, const std::string& sec) {
    if (!r.has_section(sec)) throw ConfigError(sec, "missing required block");
    LameMaterial m{r.require_real(sec, "lambda"), r.require_real(sec, "mu")};
    if (!is_admissible(m))
        throw ConfigError(sec + ".mu",
                          "material is not admissible (needs mu > 0 and 3*lambda + 2*mu > 0)");
    return m;
}

void parse_eigenstress(ConfigReader& r, ExperimentConfig& cfg) {
    const std::string sec = "eigenstress";
    if (!r.has_section(sec)) throw ConfigError(sec, "missing required block");
    auto tensor = r.take(sec, "tensor");
    if (tensor) {
        if (uses_k_pair(cfg.command))
            throw ConfigError(sec + ".tensor",
                              "this command needs the diagonal two-equal form (k1, k3)");
        auto v = parse_reals_or_throw(sec + ".tensor", *tensor, 6);
        Mat3 s;
        s << v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5];
        cfg.sigma_star = s;
        return;
    }
    double k1 = r.require_real(sec, "k1");
    double k3 = r.require_real(sec, "k3");
    double k2 = r.take_real(sec, "k2").value_or(k1);
    if (uses_k_pair(cfg.command)) {
        double scale = std::max({1.0, std::abs(k1), std::abs(k3)});
        if (std::abs(k2 - k1) > 1e-12 * scale)
            throw ConfigError(sec + ".k2", "this command needs k2 = k1 (two equal eigenvalues)");
        if (std::abs(k1 - k3) <= 1e-12 * scale)
            throw ConfigError(sec + ".k3", "k3 must differ from k1 (distinct third eigenvalue)");
    }
    cfg.k1 = k1;
    cfg.k3 = k3;
    cfg.sigma_star = Vec3(k1, k2, k3).asDiagonal();
}

void parse_grid(ConfigReader& r, ExperimentConfig& cfg) {
    if (!r.has_section("grid")) throw ConfigError("grid", "missing required block");
    long long res = parse_int_or_throw("grid.resolution", r.require("grid", "resolution"));
    if (res < 8 || res > 4096)
        throw ConfigError("grid.resolution", "resolution must be in [8, 4096]");
    double padding = r.require_real("grid", "padding");
    if (uses_spectral_solver(cfg.command)) {
        if (padding < 3.0 - 1e-12)
            throw ConfigError("grid.padding",
                              "the spectral solver requires padding >= 3 (periodic images)");
    } else if (padding < 1.0) {
        throw ConfigError("grid.padding", "padding must be >= 1 so the grid covers the shape");
    }
    cfg.resolution = static_cast<int>(res);
    cfg.padding = padding;
    cfg.has_grid = true;
}

void parse_potential_block(ConfigReader& r, ExperimentConfig& cfg) {
    if (!r.has_section("potential")) throw ConfigError("potential", "missing required block");
    PotentialRequest req;
    const std::string kind = trim(r.require("potential", "kind"));
    if (kind == "newtonian")
        req.kind = PotentialKind::Newtonian;
    else if (kind == "biharmonic")
        req.kind = PotentialKind::Biharmonic;
    else if (kind == "ntilde")
        req.kind = PotentialKind::NtildeAxis;
    else if (kind == "d2h")
        req.kind = PotentialKind::D2HAxis;
    else
        throw ConfigError("potential.kind", "unknown kind '" + kind +
                                                "' (newtonian, biharmonic, ntilde, d2h)");
    bool axis_kind = req.kind == PotentialKind::NtildeAxis || req.kind == PotentialKind::D2HAxis;
    auto axis = r.take_int("potential", "axis");
    if (axis_kind) {
        if (!axis) throw ConfigError("potential.axis", "missing required key (0, 1, or 2)");
        if (*axis < 0 || *axis > 2) throw ConfigError("potential.axis", "axis must be 0, 1, or 2");
        req.axis = static_cast<int>(*axis);
    } else if (axis) {
        throw ConfigError("potential.axis", "axis applies only to ntilde and d2h");
    }
    if (auto pts = r.take("potential", "points")) {
        std::istringstream in(*pts);
        std::string triple;
        while (std::getline(in, triple, ';')) {
            if (trim(triple).empty()) continue;
            req.points.push_back(parse_vec3_or_throw("potential.points", triple));
        }
    }
    if (auto n = r.take_int("potential", "random_points")) {
        if (*n < 0) throw ConfigError("potential.random_points", "must be >= 0");
        req.random_points = static_cast<int>(*n);
    }
    if (req.points.empty() && req.random_points == 0)
        throw ConfigError("potential.points",
                          "need at least one evaluation point (points or random_points)");
    cfg.potential = std::move(req);
}

void parse_flux_block(ConfigReader& r, ExperimentConfig& cfg) {
    if (!r.has_section("flux")) throw ConfigError("flux", "missing required block");
    FluxConfig fc;
    fc.semi_axes = r.require_vec3("flux", "semi_axes");
    if (!(fc.semi_axes.minCoeff() > 0.0))
        throw ConfigError("flux.semi_axes", "semi-axes must be positive");
    if (auto a = r.take_vec3("flux", "rotation_zyx")) fc.rotation = rotation_zyx(*a);
    if (auto n = r.take_int("flux", "resolution")) {
        if (*n < 16 || *n > 1024)
            throw ConfigError("flux.resolution", "resolution must be in [16, 1024]");
        fc.resolution = static_cast<int>(*n);
    }
    if (auto n = r.take_int("flux", "cone_directions")) {
        if (*n < 0) throw ConfigError("flux.cone_directions", "must be >= 0");
        fc.cone_directions = static_cast<int>(*n);
    }
    if (auto a = r.take_real("flux", "cone_half_angle_deg")) {
        if (!(*a > 0.0 && *a < 90.0))
            throw ConfigError("flux.cone_half_angle_deg", "must lie in (0, 90)");
        fc.cone_half_angle_deg = *a;
    }
    cfg.flux = fc;
}

// ---------------------------------------------------------------------------
// Reports and artifacts.

struct Report {
    std::vector<std::pair<std::string, std::string>> fields;
    std::vector<std::pair<std::string, double>> numeric;
    std::vector<std::string> csv_header;
    std::vector<std::vector<std::string>> csv_rows;
    std::optional<VoxelMask> mask;
};

void put(Report& r, const std::string& key, double v) {
    r.fields.emplace_back(key, format_real(v));
    r.numeric.emplace_back(key, v);
}

void put_int(Report& r, const std::string& key, long long v) {
    r.fields.emplace_back(key, std::to_string(v));
    r.numeric.emplace_back(key, static_cast<double>(v));
}

void put_flag(Report& r, const std::string& key, bool v) { put_int(r, key, v ? 1 : 0); }

void put_text(Report& r, const std::string& key, const std::string& v) {
    r.fields.emplace_back(key, v);
}

void put_vec(Report& r, const std::string& prefix, const Vec3& v) {
    static const char* suffix[3] = {"_x", "_y", "_z"};
    for (int i = 0; i < 3; ++i) put(r, prefix + suffix[i], v[i]);
}

void put_mat(Report& r, const std::string& prefix, const Mat3& m) {
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            put(r, prefix + "_" + std::to_string(i) + std::to_string(j), m(i, j));
}

template <typename T>
std::vector<Vec3> strided(const std::vector<T>& v, std::size_t max_count) {
    if (v.size() <= max_count) return v;
    std::vector<Vec3> out;
    const std::size_t step = (v.size() + max_count - 1) / max_count;
    for (std::size_t i = 0; i < v.size(); i += step) out.push_back(v[i]);
    return out;
}

std::vector<Vec3> potential_points(const ExperimentConfig& cfg, const InclusionShape& shape) {
    std::vector<Vec3> pts = cfg.potential->points;
    if (cfg.potential->random_points > 0) {
        CounterRng rng(cfg.seed, 1);
        const Aabb box = bounding_box(shape);
        int placed = 0;
        long long attempts = 0;
        const long long cap = 10000ll * cfg.potential->random_points;
        while (placed < cfg.potential->random_points) {
            if (++attempts > cap)
                throw std::runtime_error(
                    "random point placement failed: shape fills too little of its bounding box");
            Vec3 x(rng.uniform(box.lo[0], box.hi[0]), rng.uniform(box.lo[1], box.hi[1]),
                   rng.uniform(box.lo[2], box.hi[2]));
            if (!contains(shape, x)) continue;
            pts.push_back(x);
            ++placed;
        }
    }
    return pts;
}

Report execute(const ExperimentConfig& cfg) {
    Report rep;
    switch (cfg.command) {
        case Command::Field:
        case Command::Uniformity: {
            VoxelMask mask =
                voxelize(*cfg.shape, make_grid(*cfg.shape, cfg.resolution, cfg.padding));
            GradUField field = solve_spectral(mask, *cfg.material, *cfg.sigma_star);
            UniformityReport u = uniformity(field, mask);
            put_int(rep, "samples", u.samples);
            if (cfg.command == Command::Uniformity) {
                put_int(rep, "margin_voxels", u.margin_voxels);
                put(rep, "rms_dev", u.rms_dev);
                put(rep, "max_dev", u.max_dev);
            }
            put_mat(rep, "mean_grad_u", u.mean);
            rep.mask = std::move(mask);
            break;
        }
        case Command::Potential: {
            VoxelMask mask =
                voxelize(*cfg.shape, make_grid(*cfg.shape, cfg.resolution, cfg.padding));
            PotentialField pf(mask);
            std::vector<Vec3> pts = potential_points(cfg, *cfg.shape);
            const PotentialRequest& req = *cfg.potential;
            rep.csv_header = {"x", "y", "z", "kind", "axis", "value", "est_error"};
            double max_err = 0.0;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                PotentialSample s = pf.sample(req.kind, req.axis, pts[i]);
                max_err = std::max(max_err, s.est_error);
                rep.csv_rows.push_back({format_real(pts[i][0]), format_real(pts[i][1]),
                                        format_real(pts[i][2]), potential_kind_name(req.kind),
                                        std::to_string(req.axis), format_real(s.value),
                                        format_real(s.est_error)});
                if (pts.size() <= 16) {
                    put(rep, "value_" + std::to_string(i), s.value);
                    put(rep, "est_error_" + std::to_string(i), s.est_error);
                }
            }
            put_int(rep, "n_points", static_cast<long long>(pts.size()));
            put(rep, "max_est_error", max_err);
            rep.mask = std::move(mask);
            break;
        }
        case Command::ShapeTest: {
            VoxelMask mask =
                voxelize(*cfg.shape, make_grid(*cfg.shape, cfg.resolution, cfg.padding));
            PotentialField pf(mask);
            std::vector<Vec3> probes = strided(interior_centers(mask, 1), 600);
            std::vector<double> values(probes.size());
            for (std::size_t i = 0; i < probes.size(); ++i) values[i] = pf.newtonian(probes[i]);
            QuadraticFitResult fit = quadratic_fit(probes, values);
            put_int(rep, "probes", static_cast<long long>(probes.size()));
            put(rep, "fit_rms", fit.fit_rms);
            put(rep, "fit_max", fit.fit_max);
            put(rep, "cond", fit.cond);
            put(rep, "threshold", cfg.fit_threshold);
            put_text(rep, "verdict", fit.fit_rms < cfg.fit_threshold
                                         ? shape_verdict_name(ShapeVerdict::EllipsoidConsistent)
                                         : shape_verdict_name(ShapeVerdict::NotEllipsoid));
            rep.mask = std::move(mask);
            break;
        }
        case Command::Theorem1: {
            Theorem1Report t =
                check_theorem1(*cfg.shape, *cfg.material, *cfg.k1, *cfg.k3,
                               make_grid(*cfg.shape, cfg.resolution, cfg.padding));
            put_vec(rep, "min_point", t.min_point);
            put_flag(rep, "hessian_posdef", t.hessian_posdef);
            put(rep, "trace_err", t.trace_err);
            put(rep, "residual_x3", t.residual_x3);
            put(rep, "x3_share", t.x3_share);
            put_vec(rep, "E_center", t.ellipsoid_E.center);
            for (int i = 0; i < 3; ++i)
                put(rep, "E_axis_" + std::to_string(i), t.ellipsoid_E.semi_axes[i]);
            put(rep, "E_ratio_1", t.ellipsoid_E.semi_axes[1] / t.ellipsoid_E.semi_axes[0]);
            put(rep, "E_ratio_2", t.ellipsoid_E.semi_axes[2] / t.ellipsoid_E.semi_axes[0]);
            break;
        }
        case Command::Theorem2: {
            Theorem2Report t =
                check_theorem2(*cfg.shape, *cfg.material, *cfg.material2, *cfg.k1, *cfg.k3,
                               make_grid(*cfg.shape, cfg.resolution, cfg.padding),
                               cfg.fit_threshold);
            put_flag(rep, "independent", t.independent);
            put(rep, "fit_rms", t.fit.fit_rms);
            put(rep, "fit_max", t.fit.fit_max);
            put(rep, "cond", t.fit.cond);
            put(rep, "threshold", cfg.fit_threshold);
            put_text(rep, "verdict", shape_verdict_name(t.verdict));
            break;
        }
        case Command::Flux: {
            const FluxConfig& fc = *cfg.flux;
            Ellipsoid envelope{Vec3::Zero(), fc.semi_axes, fc.rotation};
            FluxQuadrature quad;
            quad.resolution = fc.resolution;
            quad.cone_directions = fc.cone_directions;
            quad.cone_half_angle_deg = fc.cone_half_angle_deg;
            FluxReport f = flux_test(envelope, *cfg.shape, *cfg.material, *cfg.k1, *cfg.k3, quad);
            put(rep, "t_star", f.t_star);
            put_vec(rep, "Q", f.Q);
            put_vec(rep, "n", f.n);
            put_vec(rep, "F", f.F_at_Q);
            put(rep, "n_dot_F", f.n_dot_F);
            put(rep, "est_error", f.est_error);
            put(rep, "shell_volume", f.shell_volume);
            if (f.cone_min_dot) put(rep, "cone_min_dot", *f.cone_min_dot);
            break;
        }
        case Command::SpecialMaterial: {
            const double k1 = *cfg.k1, k3 = *cfg.k3;
            put(rep, "k1", k1);
            put(rep, "k3", k3);
            MaterialRay g0 = special_material_gamma0(k1, k3);
            put(rep, "gamma0_ratio", g0.ratio);
            put_flag(rep, "gamma0_admissible", g0.admissible);
            put_flag(rep, "gamma0_same_sign", g0.same_sign);
            Eta2Report e2 = special_material_eta2(k1, k3);
            put(rep, "eta2_ratio_printed", e2.condition.ratio);
            put(rep, "eta2_ratio_via_eta", e2.from_eta_formula.ratio);
            put_flag(rep, "eta2_agree", e2.agree);
            JointSpecialMaterial joint = special_material_joint(k1, k3);
            put(rep, "joint_determinant", joint.determinant);
            put_flag(rep, "joint_solvable", joint.solvable);
            put(rep, "joint_ratio", joint.ratio);
            put_flag(rep, "joint_admissible", joint.admissible);
            break;
        }
        case Command::Appendix: {
            AppendixReport a = appendix_checks(
                *cfg.shape, make_grid(*cfg.shape, cfg.resolution, cfg.padding));
            static const char* pair_name[3] = {"xy", "xz", "yz"};
            for (int k = 0; k < 3; ++k)
                put(rep, std::string("mixed_dev_") + pair_name[k], a.mixed_dev[k]);
            for (int k = 0; k < 3; ++k)
                put(rep, std::string("mixed_mean_") + pair_name[k], a.mixed_mean[k]);
            put(rep, "identical_case_err", a.identical_case_err);
            break;
        }
    }
    return rep;
}

std::vector<std::string> artifact_header(std::uint64_t hash) {
    return {std::string("# tool = ") + tool_version(), "# config_hash = " + format_hash(hash)};
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write artifact '" + path.string() + "'");
    for (const std::string& line : lines) f << line << '\n';
    if (!f) throw std::runtime_error("write failed for artifact '" + path.string() + "'");
}

std::string csv_join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
    }
    return out;
}

const char* classify_monotonicity(const std::vector<double>& v) {
    bool inc = true, dec = true, constant = true;
    for (std::size_t i = 0; i + 1 < v.size(); ++i) {
        const double d = v[i + 1] - v[i];
        if (!(d > 0.0)) inc = false;
        if (!(d < 0.0)) dec = false;
        if (d != 0.0) constant = false;
    }
    if (constant) return "constant";
    if (dec) return "strictly_decreasing";
    if (inc) return "strictly_increasing";
    return "non_monotonic";
}

}  // namespace

const char* tool_version() { return "eshlab 0.1.0"; }

const char* command_name(Command command) {
    switch (command) {
        case Command::Field: return "field";
        case Command::Potential: return "potential";
        case Command::Uniformity: return "uniformity";
        case Command::ShapeTest: return "shape-test";
        case Command::Theorem1: return "theorem1";
        case Command::Theorem2: return "theorem2";
        case Command::Flux: return "flux";
        case Command::SpecialMaterial: return "special-material";
        case Command::Appendix: return "appendix";
    }
    return "unknown";
}

ConfigError::ConfigError(std::string key, const std::string& message)
    : std::runtime_error("[" + key + "] " + message), key_(std::move(key)) {}

ExperimentConfig parse_config(const std::string& text) {
    ConfigReader r(tokenize(text));
    ExperimentConfig cfg;

    const std::string cmd = trim(r.require("", "command"));
    bool known = false;
    for (Command c : {Command::Field, Command::Potential, Command::Uniformity, Command::ShapeTest,
                      Command::Theorem1, Command::Theorem2, Command::Flux,
                      Command::SpecialMaterial, Command::Appendix}) {
        if (cmd == command_name(c)) {
            cfg.command = c;
            known = true;
            break;
        }
    }
    if (!known) throw ConfigError("command", "unknown command '" + cmd + "'");

    if (auto s = r.take("", "seed")) {
        long long v = parse_int_or_throw("seed", *s);
        if (v < 0) throw ConfigError("seed", "seed must be >= 0");
        cfg.seed = static_cast<std::uint64_t>(v);
    }

    if (cfg.command != Command::SpecialMaterial) {
        if (!r.has_section("shape")) throw ConfigError("shape", "missing required block");
        cfg.shape = parse_shape(r, "shape");
    }

    const bool needs_material = cfg.command == Command::Field ||
                                cfg.command == Command::Uniformity ||
                                cfg.command == Command::Theorem1 ||
                                cfg.command == Command::Theorem2 || cfg.command == Command::Flux;
    if (needs_material) cfg.material = parse_material(r, "material");
    if (cfg.command == Command::Theorem2) cfg.material2 = parse_material(r, "material2");

    const bool needs_eigenstress = needs_material || cfg.command == Command::SpecialMaterial;
    if (needs_eigenstress) parse_eigenstress(r, cfg);

    if (uses_grid(cfg.command)) parse_grid(r, cfg);

    if (cfg.command == Command::Potential) parse_potential_block(r, cfg);
    if (cfg.command == Command::Flux) parse_flux_block(r, cfg);

    if (cfg.command == Command::ShapeTest || cfg.command == Command::Theorem2) {
        if (auto t = r.take_real("fit", "threshold")) {
            if (!(*t > 0.0)) throw ConfigError("fit.threshold", "threshold must be positive");
            cfg.fit_threshold = *t;
        }
    }

    if (auto v = r.take("output", "report")) cfg.output.report = *v;
    if (auto v = r.take("output", "table")) cfg.output.table = *v;
    if (auto v = r.take("output", "mask")) {
        if (!produces_mask_dump(cfg.command))
            throw ConfigError("output.mask", "this command does not produce a voxel mask");
        cfg.output.mask = *v;
    }

    r.finish();
    cfg.semantic_lines = r.semantic_lines();
    return cfg;
}

std::uint64_t config_hash(const ExperimentConfig& config) {
    std::uint64_t h = kFnvOffset;
    for (const std::string& line : config.semantic_lines) {
        h = fnv1a(line, h);
        h = fnv1a("\n", h);
    }
    h = fnv1a("seed=" + std::to_string(config.seed), h);
    return h;
}

ExperimentConfig with_override(const ExperimentConfig& config, const std::string& key,
                               double value) {
    ExperimentConfig out = config;
    bool integral = false;

    if (key == "grid.resolution") {
        if (!out.has_grid) throw ConfigError(key, "this command does not take a grid");
        if (value != std::floor(value) || value < 8 || value > 4096)
            throw ConfigError(key, "resolution must be an integer in [8, 4096]");
        out.resolution = static_cast<int>(value);
        integral = true;
    } else if (key == "grid.padding") {
        if (!out.has_grid) throw ConfigError(key, "this command does not take a grid");
        const double floor_pad = uses_spectral_solver(out.command) ? 3.0 - 1e-12 : 1.0;
        if (value < floor_pad)
            throw ConfigError(key, uses_spectral_solver(out.command)
                                       ? "the spectral solver requires padding >= 3"
                                       : "padding must be >= 1");
        out.padding = value;
    } else if (key == "eigenstress.k1" || key == "eigenstress.k3") {
        if (!out.k1 || !out.k3)
            throw ConfigError(key, "the config does not define diagonal eigenstress eigenvalues");
        double k1 = *out.k1, k3 = *out.k3;
        (key == "eigenstress.k1" ? k1 : k3) = value;
        if (uses_k_pair(out.command)) {
            const double scale = std::max({1.0, std::abs(k1), std::abs(k3)});
            if (std::abs(k1 - k3) <= 1e-12 * scale)
                throw ConfigError(key, "k1 and k3 must differ");
        }
        if (out.sigma_star) {
            Mat3 s = *out.sigma_star;
            // A k2 that tracked k1 keeps tracking it through the override.
            if (s(1, 1) == *out.k1 && key == "eigenstress.k1") s(1, 1) = k1;
            s(0, 0) = k1;
            s(2, 2) = k3;
            out.sigma_star = s;
        }
        out.k1 = k1;
        out.k3 = k3;
    } else if (key == "material.lambda" || key == "material.mu") {
        if (!out.material) throw ConfigError(key, "this command does not take a material");
        LameMaterial m = *out.material;
        (key == "material.lambda" ? m.lambda : m.mu) = value;
        if (!is_admissible(m))
            throw ConfigError(key, "override makes the material inadmissible");
        out.material = m;
    } else if (key == "flux.resolution") {
        if (!out.flux) throw ConfigError(key, "this command does not take a flux block");
        if (value != std::floor(value) || value < 16 || value > 1024)
            throw ConfigError(key, "flux resolution must be an integer in [16, 1024]");
        out.flux->resolution = static_cast<int>(value);
        integral = true;
    } else if (key == "fit.threshold") {
        if (out.command != Command::ShapeTest && out.command != Command::Theorem2)
            throw ConfigError(key, "this command does not take a fit threshold");
        if (!(value > 0.0)) throw ConfigError(key, "threshold must be positive");
        out.fit_threshold = value;
    } else {
        throw ConfigError(key, "unknown sweep key");
    }

    const std::string prefix = key + "=";
    std::erase_if(out.semantic_lines,
                  [&](const std::string& line) { return line.rfind(prefix, 0) == 0; });
    out.semantic_lines.push_back(
        prefix + (integral ? std::to_string(static_cast<long long>(value)) : format_real(value)));
    std::sort(out.semantic_lines.begin(), out.semantic_lines.end());
    return out;
}

std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& config,
                                                  const std::filesystem::path& out_dir) {
    Report rep = execute(config);
    std::filesystem::create_directories(out_dir);
    const std::uint64_t hash = config_hash(config);
    std::vector<std::filesystem::path> written;

    std::vector<std::string> lines = artifact_header(hash);
    lines.push_back(std::string("command = ") + command_name(config.command));
    for (const auto& [key, value] : rep.fields) lines.push_back(key + " = " + value);
    const std::string report_name = config.output.report.empty()
                                        ? std::string(command_name(config.command)) + ".txt"
                                        : config.output.report;
    const std::filesystem::path report_path = out_dir / report_name;
    write_lines(report_path, lines);
    written.push_back(report_path);

    if (!rep.csv_rows.empty()) {
        std::vector<std::string> csv = artifact_header(hash);
        csv.push_back(csv_join(rep.csv_header));
        for (const auto& row : rep.csv_rows) csv.push_back(csv_join(row));
        const std::string table_name = config.output.table.empty()
                                           ? std::string(command_name(config.command)) + ".csv"
                                           : config.output.table;
        const std::filesystem::path table_path = out_dir / table_name;
        write_lines(table_path, csv);
        written.push_back(table_path);
    }

    if (!config.output.mask.empty() && rep.mask) {
        const std::filesystem::path mask_path = out_dir / config.output.mask;
        write_mask(mask_path.string(), *rep.mask);
        written.push_back(mask_path);
    }
    return written;
}

std::vector<std::filesystem::path> run_sweep(const ExperimentConfig& config,
                                             const std::string& key,
                                             const std::vector<double>& values,
                                             const std::filesystem::path& out_dir) {
    if (values.empty()) throw ConfigError("--sweep", "empty sweep value list");

    std::vector<std::vector<std::pair<std::string, double>>> rows;
    for (double v : values) rows.push_back(execute(with_override(config, key, v)).numeric);

    // Columns follow the first row; every run of one command emits the same
    // numeric keys.
    std::vector<std::string> columns;
    for (const auto& [k, v] : rows.front()) columns.push_back(k);

    std::uint64_t hash = config_hash(config);
    {
        std::string sweep_line = "sweep." + key + "=";
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) sweep_line += ',';
            sweep_line += format_real(values[i]);
        }
        hash = fnv1a("\n" + sweep_line, hash);
    }

    std::vector<std::string> csv = artifact_header(hash);
    csv.push_back(csv_join([&] {
        std::vector<std::string> h{key};
        h.insert(h.end(), columns.begin(), columns.end());
        return h;
    }()));
    std::map<std::string, std::vector<double>> by_column;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> cells{format_real(values[i])};
        std::map<std::string, double> lookup(rows[i].begin(), rows[i].end());
        for (const std::string& col : columns) {
            const double v = lookup.count(col) ? lookup.at(col) : std::nan("");
            cells.push_back(format_real(v));
            by_column[col].push_back(v);
        }
        csv.push_back(csv_join(cells));
    }

    std::vector<std::string> lines = artifact_header(hash);
    lines.push_back(std::string("command = ") + command_name(config.command));
    lines.push_back("sweep_key = " + key);
    lines.push_back("n_values = " + std::to_string(values.size()));
    for (const std::string& col : columns)
        lines.push_back("flag_" + col + " = " + classify_monotonicity(by_column.at(col)));

    // A sign change of the joint determinant along a k3 sweep brackets the
    // special-material ray; refine it by bisection and report the root.
    if (config.command == Command::SpecialMaterial && key == "eigenstress.k3" &&
        by_column.count("joint_determinant")) {
        const std::vector<double>& det = by_column.at("joint_determinant");
        for (std::size_t i = 0; i + 1 < det.size(); ++i) {
            if (!(det[i] == 0.0) && !(det[i] * det[i + 1] < 0.0)) continue;
            double lo = values[i], hi = values[i + 1], flo = det[i];
            if (flo == 0.0) {
                hi = lo;
            } else {
                for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double fm = special_material_joint(*config.k1, mid).determinant;
                    if (fm == 0.0) {
                        lo = hi = mid;
                        break;
                    }
                    if ((fm > 0.0) == (flo > 0.0)) {
                        lo = mid;
                        flo = fm;
                    } else {
                        hi = mid;
                    }
                }
            }
            const double root = 0.5 * (lo + hi);
            lines.push_back("sign_change_low = " + format_real(values[i]));
            lines.push_back("sign_change_high = " + format_real(values[i + 1]));
            lines.push_back("refined_root = " + format_real(root));
            lines.push_back("ratio_at_root = " +
                            format_real(special_material_gamma0(*config.k1, root).ratio));
            break;
        }
    }

    std::filesystem::create_directories(out_dir);
    const std::string base = std::string(command_name(config.command)) + "_sweep";
    const std::filesystem::path report_path =
        out_dir / (config.output.report.empty() ? base + ".txt" : config.output.report);
    const std::filesystem::path table_path =
        out_dir / (config.output.table.empty() ? base + ".csv" : config.output.table);
    write_lines(report_path, lines);
    write_lines(table_path, csv);
    return {report_path, table_path};
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"inclusion lab experiment runner"};
    std::string config_path, out_dir = ".", sweep_arg;
    std::uint64_t seed = 0;
    int threads = 0;
    app.add_option("--config", config_path, "config document path")->required();
    app.add_option("--out", out_dir, "artifact directory (default .)");
    CLI::Option* seed_opt = app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker thread cap (0 = library default)");
    app.add_option("--sweep", sweep_arg, "swept key and values: key=v1,v2,...");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "config error [command line]: " << e.what() << "\n";
        return 2;
    }

    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        err << "config error [--config]: cannot open '" << config_path << "'\n";
        return 2;
    }
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    try {
        ExperimentConfig cfg = parse_config(text);
        if (seed_opt->count() > 0) cfg.seed = seed;
        if (threads < 0) throw ConfigError("--threads", "thread count must be >= 0");
        cfg.threads = threads;
#ifdef _OPENMP
        if (threads > 0) omp_set_num_threads(threads);
#endif

        std::vector<std::filesystem::path> written;
        if (!sweep_arg.empty()) {
            const auto eq = sweep_arg.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--sweep", "expected key=v1,v2,...");
            const std::string key = trim(sweep_arg.substr(0, eq));
            std::vector<double> values;
            std::istringstream vs(sweep_arg.substr(eq + 1));
            std::string tok;
            while (std::getline(vs, tok, ','))
                values.push_back(parse_real_or_throw("--sweep", tok));
            written = run_sweep(cfg, key, values, out_dir);
        } else {
            written = run_experiment(cfg, out_dir);
        }
        for (const auto& p : written) out << p.string() << "\n";
        return 0;
    } catch (const ConfigError& e) {
        err << "config error " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace eshlab
