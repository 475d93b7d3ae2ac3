#pragma once

namespace ltlm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitInvariant = 4;

int run(int argc, char** argv);

}  // namespace ltlm::cli
