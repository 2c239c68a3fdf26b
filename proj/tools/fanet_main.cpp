#include <iostream>

#include <CLI11.hpp>

#include "fanet/commands.hpp"
#include "fanet/common.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fanet: desk-scale building extraction from aerial imagery"};
    app.require_subcommand(1);

    fanet::CliOptions opt;
    std::int64_t seed_arg = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "key=value config file");
        sub->add_option("--checkpoint", opt.checkpoint_path, "checkpoint path");
        sub->add_option("--manifest", opt.manifest_path, "dataset manifest (image<TAB>mask<TAB>split)");
        sub->add_option("--out", opt.out_dir, "output directory");
        sub->add_option("--threshold", opt.threshold, "probability threshold in (0,1)");
        sub->add_option("--seed", seed_arg, "RNG seed")->each([&](const std::string&) {
            opt.has_seed = true;
        });
    };

    CLI::App* train = app.add_subcommand("train", "optimize a model on a manifest");
    CLI::App* eval = app.add_subcommand("eval", "score a checkpoint against labeled data");
    CLI::App* predict = app.add_subcommand("predict", "segment one image");
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference audit of the backward pass");
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    for (CLI::App* sub : {train, eval, predict, gradcheck, synth}) add_common(sub);
    predict->add_option("image", opt.image_path, "input PNG");
    gradcheck->add_option("selector", opt.selector,
                          "all, encoder, fam, dem, rfb, dam or decoder");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    opt.seed = static_cast<std::uint64_t>(seed_arg);
    try {
        if (train->parsed()) return fanet::cmd_train(opt);
        if (eval->parsed()) return fanet::cmd_eval(opt);
        if (predict->parsed()) return fanet::cmd_predict(opt);
        if (gradcheck->parsed()) return fanet::cmd_gradcheck(opt);
        if (synth->parsed()) return fanet::cmd_synth(opt);
    } catch (const fanet::FanetError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
