#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace svp::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes are a stable contract: 0 success, 1 config error,
// 2 bound precondition violated, 3 coverage failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitCoverage = 3;

struct CommonOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string format = "both";  // json | csv | both
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    int jobs = 1;
};

int run_bound(const CommonOptions& options);
int run_verify(const CommonOptions& options);
int run_plan(const CommonOptions& options);
int run_classify(const CommonOptions& options);
int run_sweep(const CommonOptions& options);

}  // namespace svp::cli
