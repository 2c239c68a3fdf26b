#pragma once

#include <cstdint>
#include <string>

namespace fanet {

struct CliOptions {
    std::string config_path;
    std::string checkpoint_path;
    std::string manifest_path;
    std::string out_dir;
    std::string image_path;    // predict positional
    std::string selector = "all";  // gradcheck positional
    double threshold = 0.0;    // 0 means "not given"
    bool has_seed = false;
    std::uint64_t seed = 0;
};

int cmd_train(const CliOptions& opt);
int cmd_eval(const CliOptions& opt);
int cmd_predict(const CliOptions& opt);
int cmd_gradcheck(const CliOptions& opt);
int cmd_synth(const CliOptions& opt);

}  // namespace fanet
