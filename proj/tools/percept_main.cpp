#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "percept/commands.hpp"
#include "percept/config.hpp"
#include "percept/errors.hpp"
#include "percept/runtime.hpp"
#include "percept/synth.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out = ".";
    std::string manifest;
    uint64_t seed = 0;
    bool seed_given = false;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config, "config file with flat dotted keys");
    sub->add_option("--out", opts.out, "output directory")->capture_default_str();
    sub->add_option("--manifest", opts.manifest, "dataset manifest (overrides data.manifest)");
    sub->add_option("--seed", opts.seed, "seed override")
        ->each([&opts](const std::string&) { opts.seed_given = true; });
    sub->add_option("--set", opts.sets, "config override key=value")->take_all();
}

percept::RunConfig make_config(const CommonOpts& opts) {
    auto cfg = opts.config.empty() ? percept::default_run_config()
                                   : percept::load_run_config(opts.config);
    if (opts.seed_given) cfg.seed = opts.seed;
    for (const auto& assignment : opts.sets) {
        percept::apply_override(cfg, assignment);
    }
    if (!opts.manifest.empty()) cfg.manifest = opts.manifest;
    percept::validate_run_config(cfg);
    percept::configure_runtime(cfg.seed);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"joint facial-expression classification and context-shifted generation"};
    app.require_subcommand(1);

    std::function<void()> run;

    auto* synth = app.add_subcommand("synth-data", "write a synthetic audio-visual benchmark");
    percept::SynthOptions synth_opts;
    std::string synth_out;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--identities", synth_opts.n_identities, "number of identities")
        ->capture_default_str();
    synth->add_option("--clips-per-identity", synth_opts.clips_per_identity,
                      "clips per identity and class")
        ->capture_default_str();
    synth->add_option("--classes", synth_opts.n_classes, "number of expression classes")
        ->capture_default_str();
    synth->add_option("--frames-per-clip", synth_opts.frames_per_clip, "frames per clip")
        ->capture_default_str();
    synth->add_option("--signal-strength", synth_opts.signal_strength,
                      "class information carried by the audio, 0 to 1")
        ->capture_default_str();
    synth->add_option("--seed", synth_opts.seed, "generator seed")->capture_default_str();
    synth->callback([&] {
        run = [&] { percept::cmd_synth_data(synth_out, synth_opts); };
    });

    CommonOpts pf_opts;
    auto* pretrain_face = app.add_subcommand("pretrain-face", "pretrain the face stream");
    add_common(pretrain_face, pf_opts);
    pretrain_face->callback([&] {
        run = [&] { percept::cmd_pretrain(make_config(pf_opts), "face", pf_opts.out); };
    });

    CommonOpts pc_opts;
    auto* pretrain_context = app.add_subcommand("pretrain-context", "pretrain the context stream");
    add_common(pretrain_context, pc_opts);
    pretrain_context->callback([&] {
        run = [&] { percept::cmd_pretrain(make_config(pc_opts), "context", pc_opts.out); };
    });

    CommonOpts ih_opts;
    std::string ih_face;
    auto* init_head = app.add_subcommand("init-head", "train a linear head on face means");
    add_common(init_head, ih_opts);
    init_head->add_option("--face", ih_face, "face stream checkpoint")->required();
    init_head->callback([&] {
        run = [&] { percept::cmd_init_head(make_config(ih_opts), ih_face, ih_opts.out); };
    });

    CommonOpts tr_opts;
    std::string tr_face, tr_context;
    auto* train = app.add_subcommand("train", "k-fold downstream training and evaluation");
    add_common(train, tr_opts);
    train->add_option("--face", tr_face, "face stream checkpoint")->required();
    train->add_option("--context", tr_context, "context stream checkpoint")->required();
    train->callback([&] {
        run = [&] { percept::cmd_train(make_config(tr_opts), tr_face, tr_context, tr_opts.out); };
    });

    CommonOpts ab_opts;
    std::string ab_face, ab_context;
    std::vector<std::string> ab_modes;
    auto* ablate = app.add_subcommand("ablate", "accuracy per ablation mode");
    add_common(ablate, ab_opts);
    ablate->add_option("--face", ab_face, "face stream checkpoint")->required();
    ablate->add_option("--context", ab_context, "context stream checkpoint")->required();
    ablate->add_option("--modes", ab_modes, "modes to run (default: all)")->delimiter(',');
    ablate->callback([&] {
        run = [&] {
            percept::cmd_ablate(make_config(ab_opts), ab_face, ab_context, ab_modes, ab_opts.out);
        };
    });

    CommonOpts cf_opts;
    std::string cf_model;
    auto* confusion = app.add_subcommand("eval-confusion", "row-normalized confusion matrix");
    add_common(confusion, cf_opts);
    confusion->add_option("--model", cf_model, "model checkpoint")->required();
    confusion->callback([&] {
        run = [&] { percept::cmd_confusion(make_config(cf_opts), cf_model, cf_opts.out); };
    });

    CommonOpts em_opts;
    std::string em_model;
    std::vector<std::string> em_ids;
    auto* embed = app.add_subcommand("embed", "export latent vectors per condition");
    add_common(embed, em_opts);
    embed->add_option("--model", em_model, "model checkpoint")->required();
    embed->add_option("--identities", em_ids, "identities to export")
        ->required()
        ->delimiter(',');
    embed->callback([&] {
        run = [&] { percept::cmd_embed(make_config(em_opts), em_model, em_ids, em_opts.out); };
    });

    CommonOpts ge_opts;
    std::string ge_model, ge_face, ge_audio;
    double ge_timestamp = -1.0;
    int64_t ge_steps = 10;
    auto* generate = app.add_subcommand("generate", "gamma-sweep generation grid");
    add_common(generate, ge_opts);
    generate->add_option("--model", ge_model, "model checkpoint")->required();
    generate->add_option("--face-image", ge_face, "input face PNG")->required();
    generate->add_option("--audio", ge_audio, "context audio WAV")->required();
    generate->add_option("--timestamp", ge_timestamp,
                         "context time in seconds (default: clip middle)");
    generate->add_option("--steps", ge_steps, "sweep steps from 0 to 1")->capture_default_str();
    generate->callback([&] {
        run = [&] {
            percept::cmd_generate(make_config(ge_opts), ge_model, ge_face, ge_audio, ge_timestamp,
                                  ge_steps, ge_opts.out);
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        run();
    } catch (const percept::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const percept::ArgumentError& e) {
        std::cerr << "argument error: " << e.what() << "\n";
        return 2;
    } catch (const percept::DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << "\n";
        return 2;
    } catch (const percept::ParseError& e) {
        std::cerr << "manifest error: " << e.what() << "\n";
        return 3;
    } catch (const percept::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const percept::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
