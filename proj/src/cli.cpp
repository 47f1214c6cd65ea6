#include "liftcam/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "liftcam/evaluation.hpp"
#include "liftcam/explain.hpp"
#include "liftcam/heatmap.hpp"
#include "liftcam/io.hpp"
#include "liftcam/synthetic.hpp"

namespace liftcam {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kWorkersEnv = "LIFTCAM_WORKERS";
constexpr const char* kFullImageMethod = "full-image";

std::size_t default_workers() {
    if (const char* env = std::getenv(kWorkersEnv)) {
        try {
            const auto n = std::stoul(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
    return 1;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io::FormatError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw io::FormatError("failed writing '" + path.string() + "'");
}

std::vector<fs::path> expand_sample_paths(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto& entry : fs::directory_iterator(p)) {
                if (entry.is_regular_file() && entry.path().extension() == ".lcs") found.push_back(entry.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    return out;
}

json map_to_json(const Tensor& t) {
    json rows = json::array();
    for (std::size_t y = 0; y < t.dim(0); ++y) {
        json row = json::array();
        for (std::size_t x = 0; x < t.dim(1); ++x) row.push_back(t[y * t.dim(1) + x]);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ExplainArgs {
    std::string model;
    std::string input;
    int cls = -1;
    std::string method;
    std::string output;
    std::string heatmap;
    std::string style = "gray";
    std::uint64_t seed = 0;
    std::size_t orderings = 100;
    std::string baseline;
    bool score_logits = false;
    bool no_channel_softmax = false;
    bool timings = false;
};

int run_explain(const ExplainArgs& args, std::ostream& out) {
    const ModelGraph model = io::load_model(args.model);
    const io::SampleFile sample = io::load_sample(args.input);
    const std::size_t cls = args.cls >= 0 ? static_cast<std::size_t>(args.cls) : sample.target_class;
    const Method method = parse_method(args.method);

    ExplainOptions options;
    options.seed = args.seed;
    options.orderings = args.orderings;
    if (!args.baseline.empty()) options.score.baseline = io::load_tensor(args.baseline);
    options.score.use_probabilities = !args.score_logits;
    options.score.channel_softmax = !args.no_channel_softmax;

    const Explanation e = explain(model, sample.image, cls, method, options);

    fs::path heatmap = args.heatmap.empty() ? fs::path(args.output).replace_extension(".ppm") : fs::path(args.heatmap);
    const HeatmapStyle style = args.style == "overlay" ? HeatmapStyle::Overlay : HeatmapStyle::Gray;
    emit_heatmap(e.map, heatmap, style, &sample.image);

    json result;
    result["format"] = "liftcam-result";
    result["version"] = io::kFormatVersion;
    result["method"] = std::string(to_string(method));
    result["class"] = cls;
    result["sample"] = sample.name;
    result["coefficients"] = e.coefficients.values;
    result["coefficient_sum"] = e.coefficients.sum();
    result["target_logit"] = e.target_logit;
    result["reference_logit"] = e.reference_logit;
    result["logit_delta"] = e.target_logit - e.reference_logit;
    if (method == Method::ShapCam) {
        result["orderings"] = args.orderings;
        result["seed"] = args.seed;
    }
    if (method == Method::ScoreCam) {
        result["score_uses_probabilities"] = options.score.use_probabilities;
        result["score_channel_softmax"] = options.score.channel_softmax;
    }
    result["raw_map"] = map_to_json(e.map.raw);
    result["heatmap"] = heatmap.filename().string();
    if (args.timings) {
        result["timings"] = {{"coefficients_seconds", e.coefficient_seconds}, {"total_seconds", e.total_seconds}};
    }
    write_text(args.output, result.dump(2) + "\n");
    out << to_string(method) << ": wrote " << args.output << " and " << heatmap.string() << '\n';
    return 0;
}

struct EvaluateArgs {
    std::string model;
    std::vector<std::string> samples;
    std::string methods = "grad-cam,grad-cam++,xgrad-cam,score-cam,ablation-cam,lift-cam";
    std::string metrics = "ic-ad-add,auc,pointing,cosine";
    std::string output;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    std::size_t orderings = 100;
};

int run_evaluate(const EvaluateArgs& args, std::ostream& out) {
    const ModelGraph model = io::load_model(args.model);
    std::vector<EvalSample> samples;
    for (const auto& p : expand_sample_paths(args.samples)) samples.push_back(io::load_sample(p).to_eval_sample());
    if (samples.empty()) throw std::invalid_argument("no samples given");

    const auto method_list = split_list(args.methods);
    for (const auto& m : method_list) {
        if (m != kFullImageMethod) parse_method(m);
    }
    const auto metric_list = split_list(args.metrics);
    bool want_conf = false, want_auc = false, want_pointing = false, want_cosine = false;
    for (const auto& m : metric_list) {
        if (m == "ic-ad-add") want_conf = true;
        else if (m == "auc") want_auc = true;
        else if (m == "pointing") want_pointing = true;
        else if (m == "cosine") want_cosine = true;
        else throw std::invalid_argument("unknown metric '" + m + "' (expected ic-ad-add, auc, pointing, cosine)");
    }

    const bool exact_reference = model.num_channels() <= kExactShapleyMaxPlayers;
    ExplainOptions options;
    options.seed = args.seed;
    options.orderings = args.orderings;

    // records[method][sample]
    std::vector<std::vector<SampleRecord>> records(method_list.size(), std::vector<SampleRecord>(samples.size()));
    auto process = [&](std::size_t s) {
        const EvalSample& sample = samples[s];
        const Tensor activations = forward_frontend(model, sample.image);
        std::vector<double> reference;
        if (want_cosine) {
            reference = compute_coefficients(model, sample.image, activations, sample.target_class,
                                             exact_reference ? Method::ExactShapley : Method::ShapCam, options)
                            .values;
        }
        for (std::size_t m = 0; m < method_list.size(); ++m) {
            ExplanationMap map;
            std::vector<double> coeffs;
            if (method_list[m] == kFullImageMethod) {
                map.raw = Tensor({activations.dim(1), activations.dim(2)}, 1.0f);
                map.normalized = Tensor({sample.image.dim(1), sample.image.dim(2)}, 1.0f);
            } else {
                auto c = compute_coefficients(model, sample.image, activations, sample.target_class,
                                              parse_method(method_list[m]), options);
                map = assemble_map(activations, c, sample.image.dim(1), sample.image.dim(2));
                coeffs = std::move(c.values);
            }
            SampleRecord r = want_conf ? confidence_record(model, sample, map) : SampleRecord{};
            r.name = sample.name;
            if (want_auc) {
                const auto auc = insertion_deletion_auc(model, sample, map);
                r.insertion_auc = auc.insertion;
                r.deletion_auc = auc.deletion;
            }
            if (want_pointing && sample.bbox) {
                try {
                    r.proportion = pointing_game(map, *sample.bbox);
                } catch (const std::domain_error&) {
                    // zero-energy map: no proportion for this sample
                }
            }
            if (want_cosine && !coeffs.empty()) {
                try {
                    r.cosine = cosine_similarity(coeffs, reference);
                } catch (const std::domain_error&) {
                }
            }
            records[m][s] = std::move(r);
        }
    };

    const std::size_t workers = std::min(args.workers ? args.workers : default_workers(), samples.size());
    if (workers <= 1) {
        for (std::size_t s = 0; s < samples.size(); ++s) process(s);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t s = w; s < samples.size(); s += workers) process(s);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    std::vector<MetricReport> reports;
    json doc;
    doc["format"] = "liftcam-metrics";
    doc["version"] = io::kFormatVersion;
    doc["metrics"] = metric_list;
    doc["reports"] = json::array();
    for (std::size_t m = 0; m < method_list.size(); ++m) {
        MetricReport report;
        report.method = method_list[m];
        report.records = std::move(records[m]);
        if (want_cosine) {
            report.cosine_reference = exact_reference ? "exact-shapley" : "shap-cam";
            report.cosine_reference_approximate = !exact_reference;
        }
        report.aggregate();
        doc["reports"].push_back(report.to_json());
        reports.push_back(std::move(report));
    }
    const std::string table = format_report_table(reports);
    out << table;
    if (!args.output.empty()) {
        write_text(args.output, doc.dump(2) + "\n");
        write_text(fs::path(args.output).replace_extension(".txt"), table);
    }
    return 0;
}

struct GenerateArgs {
    std::string out_dir;
    std::size_t channels = 8, height = 4, width = 4, classes = 5, samples = 4;
    std::string head = "relu-mlp";
    std::uint64_t seed = 0;
};

int run_generate(const GenerateArgs& args, std::ostream& out) {
    SyntheticSpec spec;
    spec.channels = args.channels;
    spec.height = args.height;
    spec.width = args.width;
    spec.num_classes = args.classes;
    spec.head = parse_head_kind(args.head);
    spec.seed = args.seed;
    const ModelGraph model = generate_synthetic_model(spec);
    fs::create_directories(args.out_dir);
    io::save_model(model, fs::path(args.out_dir) / "model.lcm");
    for (std::size_t i = 0; i < args.samples; ++i) {
        io::SampleFile s;
        std::ostringstream name;
        name << "sample_" << std::setw(3) << std::setfill('0') << i;
        s.name = name.str();
        s.image = generate_synthetic_image(model, args.seed * 1000003u + i);
        const auto fwd = forward_full(model, s.image);
        s.target_class = static_cast<std::size_t>(
            std::max_element(fwd.logits.begin(), fwd.logits.end()) - fwd.logits.begin());
        s.bbox = generate_synthetic_bbox(s.image.dim(1), s.image.dim(2), args.seed * 1000003u + i);
        s.reference_logits = fwd.logits;
        s.reference_activations = fwd.activations;
        s.reference_gradient =
            backward_head_gradient(model, HeadTrace::build(model, fwd.activations, false), s.target_class);
        io::save_sample(s, fs::path(args.out_dir) / (s.name + ".lcs"));
    }
    out << "wrote model.lcm and " << args.samples << " samples to " << args.out_dir << '\n';
    return 0;
}

struct CheckArgs {
    std::string model;
    std::vector<std::string> samples;
    double tolerance = 1e-4;
};

int run_check(const CheckArgs& args, std::ostream& out) {
    const ModelGraph model = io::load_model(args.model);
    bool ok = true;
    for (const auto& p : expand_sample_paths(args.samples)) {
        const io::SampleFile s = io::load_sample(p);
        const auto fwd = forward_full(model, s.image);
        auto report = [&](const char* what, double diff) {
            const bool pass = diff <= args.tolerance;
            ok = ok && pass;
            out << (pass ? "ok   " : "FAIL ") << s.name << " " << what << " max|diff|=" << diff << '\n';
        };
        if (s.reference_logits) {
            if (s.reference_logits->size() != fwd.logits.size()) {
                throw io::FormatError(p.string() + ": recorded logits have the wrong length");
            }
            double diff = 0.0;
            for (std::size_t i = 0; i < fwd.logits.size(); ++i)
                diff = std::max(diff, std::abs(fwd.logits[i] - (*s.reference_logits)[i]));
            report("logits", diff);
        }
        auto tensor_diff = [&](const Tensor& a, const Tensor& b) {
            if (a.shape() != b.shape()) {
                throw io::FormatError(p.string() + ": recorded tensor " + shape_to_string(b.shape()) +
                                      " does not match " + shape_to_string(a.shape()));
            }
            double diff = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(double(a[i]) - b[i]));
            return diff;
        };
        if (s.reference_activations) report("activations", tensor_diff(fwd.activations, *s.reference_activations));
        if (s.reference_gradient) {
            const Tensor g =
                backward_head_gradient(model, HeadTrace::build(model, fwd.activations, false), s.target_class);
            report("gradient", tensor_diff(g, *s.reference_gradient));
        }
    }
    return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Class activation maps by Shapley-consistent coefficients"};
    app.require_subcommand(1);

    std::vector<std::string> method_choices;
    for (auto m : method_names()) method_choices.emplace_back(m);

    ExplainArgs ex;
    auto* explain_cmd = app.add_subcommand("explain", "Compute CAM coefficients and a heatmap for one sample");
    explain_cmd->add_option("--model", ex.model, "Model file")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("--input", ex.input, "Sample file")->required()->check(CLI::ExistingFile);
    explain_cmd->add_option("--class", ex.cls, "Target class (defaults to the sample's)");
    explain_cmd->add_option("--method", ex.method, "Attribution method")->required()->check(CLI::IsMember(method_choices));
    explain_cmd->add_option("--output", ex.output, "Result file (JSON)")->required();
    explain_cmd->add_option("--heatmap", ex.heatmap, "Heatmap path (defaults to the output with .ppm)");
    explain_cmd->add_option("--style", ex.style, "Heatmap style")->check(CLI::IsMember({"gray", "overlay"}));
    explain_cmd->add_option("--seed", ex.seed, "Ordering seed for shap-cam");
    explain_cmd->add_option("--orderings", ex.orderings, "Number of orderings for shap-cam")->check(CLI::PositiveNumber);
    explain_cmd->add_option("--baseline", ex.baseline, "Baseline image tensor for score-cam")->check(CLI::ExistingFile);
    explain_cmd->add_flag("--score-logits", ex.score_logits, "Score-CAM scores with logits instead of probabilities");
    explain_cmd->add_flag("--no-channel-softmax", ex.no_channel_softmax, "Score-CAM keeps raw channel scores");
    explain_cmd->add_flag("--timings", ex.timings, "Record wall-clock timings in the result file");

    EvaluateArgs ev;
    auto* eval_cmd = app.add_subcommand("evaluate", "Score methods with faithfulness and localization metrics");
    eval_cmd->add_option("--model", ev.model, "Model file")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--samples", ev.samples, "Sample files or directories of .lcs files")->required();
    eval_cmd->add_option("--methods", ev.methods, "Comma-separated methods (full-image = all-ones map)");
    eval_cmd->add_option("--metrics", ev.metrics, "Comma-separated subset of ic-ad-add,auc,pointing,cosine");
    eval_cmd->add_option("--output", ev.output, "Metrics file (JSON); a .txt table is written beside it");
    eval_cmd->add_option("--workers", ev.workers, std::string("Worker threads (default $") + kWorkersEnv + " or 1)");
    eval_cmd->add_option("--seed", ev.seed, "Ordering seed for shap-cam");
    eval_cmd->add_option("--orderings", ev.orderings, "Number of orderings for shap-cam")->check(CLI::PositiveNumber);

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Write a seeded synthetic model and samples");
    gen_cmd->add_option("--out", gen.out_dir, "Output directory")->required();
    gen_cmd->add_option("--channels", gen.channels, "Activation channels N_l")->check(CLI::Range(1, 64));
    gen_cmd->add_option("--height", gen.height, "Activation height")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--width", gen.width, "Activation width")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--classes", gen.classes, "Number of classes")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--head", gen.head, "Head kind")->check(CLI::IsMember({"linear", "relu-mlp", "conv-relu"}));
    gen_cmd->add_option("--seed", gen.seed, "Weight seed");
    gen_cmd->add_option("--samples", gen.samples, "Number of samples");

    CheckArgs chk;
    auto* check_cmd = app.add_subcommand("check", "Compare recorded reference tensors with this implementation");
    check_cmd->add_option("--model", chk.model, "Model file")->required()->check(CLI::ExistingFile);
    check_cmd->add_option("--samples", chk.samples, "Sample files or directories")->required();
    check_cmd->add_option("--tolerance", chk.tolerance, "Maximum absolute difference");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return e.get_exit_code() ? e.get_exit_code() : 2;
    }

    try {
        if (*explain_cmd) return run_explain(ex, out);
        if (*eval_cmd) return run_evaluate(ev, out);
        if (*gen_cmd) return run_generate(gen, out);
        if (*check_cmd) return run_check(chk, out);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace liftcam
