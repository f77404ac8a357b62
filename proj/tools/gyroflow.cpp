// gyroflow command-line front end: gyro-field, estimate, fuse, eval, synth.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "gyroflow/config.hpp"
#include "gyroflow/flo_io.hpp"
#include "gyroflow/fusion.hpp"
#include "gyroflow/gyro_field.hpp"
#include "gyroflow/gyro_log.hpp"
#include "gyroflow/image_io.hpp"
#include "gyroflow/synthetic.hpp"

namespace fs = std::filesystem;
using namespace gyroflow;

namespace {

enum Exit { ok = 0, usage = 2, validation = 3, parse = 4, numeric = 5, io = 6 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string config, out = ".", intrinsics, timing;
    std::optional<std::uint64_t> seed;
};

//! everything numeric a run uses, after file values and flag overrides
struct RunConfig {
    std::optional<CameraIntrinsics> intrinsics;
    std::optional<FrameTiming> timing;
    bool readout_defaulted = false;
    EstimatorConfig estimator;
    FusionConfig fusion;
    std::optional<Json> scene;
    int patch_count = default_patch_count;
    std::uint64_t seed = 0;
    bool seed_given = false;  // by --seed or the config file

    Json to_json() const {
        Json j;
        if (intrinsics) j["intrinsics"] = gyroflow::to_json(*intrinsics);
        if (timing) j["timing"] = gyroflow::to_json(*timing);
        j["estimator"] = gyroflow::to_json(estimator);
        j["fusion"] = gyroflow::to_json(fusion);
        j["patch_count"] = patch_count;
        j["seed"] = seed;
        return j;
    }
};

RunConfig load_config(const Common& c) {
    RunConfig rc;
    if (!c.config.empty()) {
        const Json j = read_json_file(c.config);
        if (!j.is_object()) throw ValidationError(c.config + ": top level must be an object");
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k == "intrinsics") {
                rc.intrinsics = intrinsics_from_json(*it);
            } else if (k == "timing") {
                rc.timing = timing_from_json(*it, "timing", &rc.readout_defaulted);
            } else if (k == "estimator") {
                rc.estimator = estimator_from_json(*it);
            } else if (k == "fusion") {
                rc.fusion = fusion_from_json(*it);
            } else if (k == "scene") {
                rc.scene = *it;
            } else if (k == "patch_count" && it->is_number_integer()) {
                rc.patch_count = it->get<int>();
            } else if (k == "seed" && it->is_number_unsigned()) {
                rc.seed = it->get<std::uint64_t>();
                rc.seed_given = true;
            } else {
                throw ValidationError(c.config + ": unknown or mistyped key '" + k + "'");
            }
        }
    }
    if (!c.intrinsics.empty()) rc.intrinsics = intrinsics_from_json(read_json_file(c.intrinsics), c.intrinsics);
    if (!c.timing.empty()) rc.timing = timing_from_json(read_json_file(c.timing), c.timing, &rc.readout_defaulted);
    if (c.seed) {
        rc.seed = *c.seed;
        rc.seed_given = true;
    }
    if (rc.patch_count < 1) throw ValidationError("patch_count must be >= 1");
    return rc;
}

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "JSON config (intrinsics, timing, estimator, fusion, scene)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "seed (default 0)");
    sub->add_option("--intrinsics", c.intrinsics, "intrinsics JSON, overrides --config")->check(CLI::ExistingFile);
    sub->add_option("--timing", c.timing, "frame timing JSON, overrides --config")->check(CLI::ExistingFile);
}

fs::path prepare_out(const Common& c) {
    fs::path p(c.out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create output directory '" + c.out + "': " + ec.message());
    return p;
}

CameraIntrinsics intrinsics_or_default(const RunConfig& rc, int w, int h, bool& defaulted) {
    defaulted = !rc.intrinsics;
    return rc.intrinsics ? *rc.intrinsics : CameraIntrinsics::synthetic_default(w, h);
}

struct GyroFieldResult {
    FlowField field;
    HomographyArray patches;
    CameraIntrinsics intrinsics;
    bool intrinsics_defaulted = false;
    std::string clock;
};

GyroFieldResult compute_gyro_field(const std::string& log_path, const RunConfig& rc, int w, int h) {
    if (!rc.timing) throw UsageError("gyro field needs frame timing (--timing or a 'timing' config section)");
    GyroFieldResult r;
    GyroLog log = read_gyro_log_file(log_path);
    r.clock = log.clock;
    r.intrinsics = intrinsics_or_default(rc, w, h, r.intrinsics_defaulted);
    try {
        r.patches = build_homography_array(log.samples, *rc.timing, r.intrinsics, w, h, rc.patch_count);
    } catch (const CoverageError& e) {
        throw CoverageError(log_path + ": " + e.what());
    }
    r.field = rasterize_gyro_field(smooth_homography_array(r.patches));
    return r;
}

// ---------------------------------------------------------------- gyro-field

struct GyroFieldArgs {
    Common common;
    std::string gyro;
    int width = 0, height = 0;
};

int cmd_gyro_field(const GyroFieldArgs& a) {
    const RunConfig rc = load_config(a.common);
    if (a.width <= 0 || a.height <= 0) throw UsageError("--width and --height must be positive");
    const GyroFieldResult g = compute_gyro_field(a.gyro, rc, a.width, a.height);
    const fs::path out = prepare_out(a.common);
    write_flo_file((out / "gyro_field.flo").string(), g.field);

    Json hs = Json::array(), qs = Json::array();
    for (int n = 0; n < g.patches.patch_count(); ++n) {
        const Mat3& h = g.patches.patch(n);
        Json row = Json::array();
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) row.push_back(h(i, j));
        hs.push_back(row);
        const Quaternion q = matrix_to_quat(g.patches.patch_rotation(n));
        qs.push_back({q.w(), q.x(), q.y(), q.z()});
    }
    Json side = {{"width", a.width},
                 {"height", a.height},
                 {"gyro_log", a.gyro},
                 {"clock", g.clock},
                 {"intrinsics", to_json(g.intrinsics)},
                 {"intrinsics_defaulted", g.intrinsics_defaulted},
                 {"timing", to_json(*rc.timing)},
                 {"readout_defaulted", rc.readout_defaulted},
                 {"patch_count", g.patches.patch_count()},
                 {"rows_per_patch", g.patches.rows_per_patch()},
                 {"homographies", hs},
                 {"rotations_wxyz", qs}};
    write_json_file((out / "gyro_field.json").string(), side);
    return ok;
}

// ------------------------------------------------------------ estimate / fuse

struct FlowArgs {
    Common common;
    std::string frame_a, frame_b, gt, valid;
    std::string gyro, gyro_field;  // fuse only
    std::string name = "flow";
    std::optional<int> levels;
};

std::pair<ImageBuffer, ImageBuffer> load_frames(const FlowArgs& a) {
    ImageBuffer ia = read_image(a.frame_a), ib = read_image(a.frame_b);
    if (!ia.same_shape(ib))
        throw ValidationError("frame size mismatch: " + a.frame_a + " is " + std::to_string(ia.width()) + "x" +
                              std::to_string(ia.height()) + "x" + std::to_string(ia.channels()) + ", " + a.frame_b +
                              " is " + std::to_string(ib.width()) + "x" + std::to_string(ib.height()) + "x" +
                              std::to_string(ib.channels()));
    return {std::move(ia), std::move(ib)};
}

void write_flow_outputs(const FlowArgs& a, const std::string& command, const RunConfig& rc, const FlowField& flow,
                        double runtime_s, Json extra) {
    const fs::path out = prepare_out(a.common);
    write_flo_file((out / (a.name + ".flo")).string(), flow);
    const Json cfg = rc.to_json();
    Json m = {{"command", command},
              {"frame_a", a.frame_a},
              {"frame_b", a.frame_b},
              {"width", flow.width()},
              {"height", flow.height()},
              {"config_hash", config_hash(cfg)},
              {"config", cfg}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = *it;
    if (!a.gt.empty()) {
        const FlowField gt = read_flo_file(a.gt);
        EpeResult e = a.valid.empty() ? endpoint_error(flow, gt) : endpoint_error(flow, gt, read_validity_mask(a.valid));
        m["epe"] = e.mean;
        m["epe_pixels"] = e.count;
    }
    m["runtime_s"] = runtime_s;
    write_json_file((out / (a.name + ".json")).string(), m);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_estimate(const FlowArgs& a) {
    RunConfig rc = load_config(a.common);
    if (a.levels) rc.estimator.levels = *a.levels;
    rc.estimator.validate();
    const auto [ia, ib] = load_frames(a);
    const auto t0 = std::chrono::steady_clock::now();
    const FlowField flow = estimate_pyramid(ia, ib, rc.estimator);
    write_flow_outputs(a, "estimate", rc, flow, seconds_since(t0), Json::object());
    return ok;
}

int cmd_fuse(const FlowArgs& a) {
    if (a.gyro.empty() == a.gyro_field.empty())
        throw UsageError("fuse needs exactly one gyro input: --gyro <log> (with timing) or --gyro-field <flo>");
    RunConfig rc = load_config(a.common);
    if (a.levels) rc.estimator.levels = *a.levels;
    rc.estimator.validate();
    const auto [ia, ib] = load_frames(a);
    FlowField g;
    Json extra = Json::object();
    if (!a.gyro_field.empty()) {
        g = read_flo_file(a.gyro_field);
        if (g.width() != ia.width() || g.height() != ia.height())
            throw ValidationError("gyro field " + a.gyro_field + " does not match the frame size");
        extra["gyro_field"] = a.gyro_field;
    } else {
        GyroFieldResult r = compute_gyro_field(a.gyro, rc, ia.width(), ia.height());
        g = std::move(r.field);
        extra["gyro_log"] = a.gyro;
        extra["intrinsics_defaulted"] = r.intrinsics_defaulted;
        extra["readout_defaulted"] = rc.readout_defaulted;
    }
    const auto t0 = std::chrono::steady_clock::now();
    const FlowField flow = run_gyroflow(ia, ib, g, rc.estimator, rc.fusion);
    write_flow_outputs(a, "fuse", rc, flow, seconds_since(t0), extra);
    return ok;
}

// ---------------------------------------------------------------------- eval

struct EvalArgs {
    Common common;
    std::string manifest, pred_dir, gt_dir, mask_dir;
};

struct ManifestEntry {
    std::string name;
    SceneCategory category;
};

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open manifest '" + path + "'");
    std::vector<ManifestEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::istringstream ls(line);
        std::string name, cat, extra;
        if (!(ls >> name)) continue;
        if (!(ls >> cat) || (ls >> extra)) throw ParseError(path + ": expected 'name category'", lineno);
        try {
            out.push_back({name, parse_category(cat)});
        } catch (const InvalidArgument& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        }
    }
    if (out.empty()) throw ValidationError("manifest '" + path + "' lists no pairs");
    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.name < y.name; });
    for (std::size_t i = 1; i < out.size(); ++i)
        if (out[i].name == out[i - 1].name) throw ValidationError("manifest lists '" + out[i].name + "' twice");
    return out;
}

int cmd_eval(const EvalArgs& a) {
    load_config(a.common);
    const auto entries = read_manifest(a.manifest);
    std::vector<std::string> missing;
    for (const auto& e : entries) {
        if (!fs::exists(fs::path(a.pred_dir) / (e.name + ".flo"))) missing.push_back(e.name + " (prediction)");
        if (!fs::exists(fs::path(a.gt_dir) / (e.name + ".flo"))) missing.push_back(e.name + " (ground truth)");
        if (!a.mask_dir.empty() && !fs::exists(fs::path(a.mask_dir) / (e.name + ".png")))
            missing.push_back(e.name + " (mask)");
    }
    if (!missing.empty()) {
        std::string msg = "unmatched pairs:";
        for (const auto& m : missing) msg += " " + m;
        throw ValidationError(msg);
    }

    constexpr SceneCategory order[] = {SceneCategory::RE, SceneCategory::Dark, SceneCategory::Fog, SceneCategory::Rain,
                                       SceneCategory::Synth};
    std::map<SceneCategory, std::pair<double, int>> acc;
    double total = 0.0;
    for (const auto& e : entries) {
        const FlowField pred = read_flo_file((fs::path(a.pred_dir) / (e.name + ".flo")).string());
        const FlowField gt = read_flo_file((fs::path(a.gt_dir) / (e.name + ".flo")).string());
        if (pred.width() != gt.width() || pred.height() != gt.height())
            throw ValidationError(e.name + ": prediction and ground truth sizes differ");
        const double epe = a.mask_dir.empty()
                               ? endpoint_error(pred, gt).mean
                               : endpoint_error(pred, gt,
                                                read_validity_mask((fs::path(a.mask_dir) / (e.name + ".png")).string()))
                                     .mean;
        auto& [sum, n] = acc[e.category];
        sum += epe;
        ++n;
        total += epe;
    }
    const double avg = total / static_cast<double>(entries.size());

    // RE, Dark, Fog, Rain always; Synth only when present
    std::vector<SceneCategory> cols(order, order + 4);
    if (acc.count(SceneCategory::Synth)) cols.push_back(SceneCategory::Synth);
    std::string header, values, csv = "category,count,epe\n";
    char buf[64];
    for (SceneCategory c : cols) {
        std::snprintf(buf, sizeof buf, "%8s", category_name(c));
        header += buf;
        const auto it = acc.find(c);
        if (it == acc.end()) {
            std::snprintf(buf, sizeof buf, "%8s", "-");
        } else {
            const double m = it->second.first / it->second.second;
            std::snprintf(buf, sizeof buf, "%8.3f", m);
            char row[96];
            std::snprintf(row, sizeof row, "%s,%d,%.17g\n", category_name(c), it->second.second, m);
            csv += row;
        }
        values += buf;
    }
    std::snprintf(buf, sizeof buf, "%8s", "Avg");
    header += buf;
    std::snprintf(buf, sizeof buf, "%8.3f", avg);
    values += buf;
    {
        char row[96];
        std::snprintf(row, sizeof row, "Avg,%zu,%.17g\n", entries.size(), avg);
        csv += row;
    }
    std::printf("%s\n%s\n", header.c_str(), values.c_str());

    const fs::path out = prepare_out(a.common);
    std::ofstream os(out / "eval.csv");
    if (!(os << csv)) throw IoError("cannot write " + (out / "eval.csv").string());
    return ok;
}

// --------------------------------------------------------------------- synth

struct SynthArgs {
    Common common;
    std::string spec;
};

int cmd_synth(const SynthArgs& a) {
    const RunConfig rc = load_config(a.common);
    Json sj = Json::object();
    if (!a.spec.empty())
        sj = read_json_file(a.spec);
    else if (rc.scene)
        sj = *rc.scene;
    SceneSpec spec = scene_from_json(sj);
    if (rc.seed_given) spec.seed = rc.seed;
    if (rc.intrinsics) spec.intrinsics = rc.intrinsics;
    const SceneBundle b = generate_synthetic_scene(spec);

    const fs::path out = prepare_out(a.common);
    write_image((out / "frame_a.png").string(), b.frame_a);
    write_image((out / "frame_b.png").string(), b.frame_b);
    write_gyro_log_file((out / "gyro.txt").string(), b.gyro);
    write_flo_file((out / "gt.flo").string(), *b.gt);
    write_image((out / "valid.png").string(), mask_image(*b.valid));
    write_json_file((out / "timing.json").string(), to_json(b.timing));
    write_json_file((out / "intrinsics.json").string(), to_json(b.intrinsics));
    write_json_file((out / "scene.json").string(), to_json(spec));
    return ok;
}

int exit_code(const Error& e) {
    switch (e.kind()) {
    case Error::Kind::parse:
    case Error::Kind::format: return parse;
    case Error::Kind::numeric: return numeric;
    case Error::Kind::io: return io;
    default: return validation;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gyro-guided optical flow toolkit"};
    app.require_subcommand(1);

    GyroFieldArgs gf;
    auto* s_gf = app.add_subcommand("gyro-field", "rasterize the gyro field of a frame pair");
    add_common(s_gf, gf.common);
    s_gf->add_option("--gyro", gf.gyro, "gyro log")->required();
    s_gf->add_option("--width", gf.width, "frame width")->required();
    s_gf->add_option("--height", gf.height, "frame height")->required();

    FlowArgs est, fus;
    auto* s_est = app.add_subcommand("estimate", "image-only coarse-to-fine flow");
    auto* s_fus = app.add_subcommand("fuse", "gyro-guided flow with per-level fusion");
    for (auto [sub, args] : {std::pair{s_est, &est}, std::pair{s_fus, &fus}}) {
        add_common(sub, args->common);
        sub->add_option("--frame-a", args->frame_a, "first frame (PNG/PGM/PPM)")->required()->check(CLI::ExistingFile);
        sub->add_option("--frame-b", args->frame_b, "second frame")->required()->check(CLI::ExistingFile);
        sub->add_option("--gt", args->gt, "ground-truth .flo for an EPE entry in the sidecar")->check(CLI::ExistingFile);
        sub->add_option("--valid", args->valid, "validity mask image for the EPE")->check(CLI::ExistingFile);
        sub->add_option("--name", args->name, "output basename (default flow)");
        sub->add_option("--levels", args->levels, "pyramid levels, overrides the config");
    }
    s_fus->add_option("--gyro", fus.gyro, "gyro log (needs timing)");
    s_fus->add_option("--gyro-field", fus.gyro_field, "precomputed gyro field .flo");

    EvalArgs ev;
    auto* s_ev = app.add_subcommand("eval", "per-category EPE table");
    add_common(s_ev, ev.common);
    s_ev->add_option("--manifest", ev.manifest, "lines of 'name category'")->required();
    s_ev->add_option("--pred-dir", ev.pred_dir, "directory of <name>.flo predictions")->required();
    s_ev->add_option("--gt-dir", ev.gt_dir, "directory of <name>.flo ground truth")->required();
    s_ev->add_option("--mask-dir", ev.mask_dir, "optional directory of <name>.png validity masks");

    SynthArgs sy;
    auto* s_sy = app.add_subcommand("synth", "render a synthetic scene bundle");
    add_common(s_sy, sy.common);
    s_sy->add_option("--spec", sy.spec, "scene spec JSON (else the config's 'scene' section)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? ok : usage;
    }

    try {
        if (s_gf->parsed()) return cmd_gyro_field(gf);
        if (s_est->parsed()) return cmd_estimate(est);
        if (s_fus->parsed()) return cmd_fuse(fus);
        if (s_ev->parsed()) return cmd_eval(ev);
        if (s_sy->parsed()) return cmd_synth(sy);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return usage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return validation;
    }
    return usage;
}
