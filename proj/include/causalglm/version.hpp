#pragma once

namespace causalglm {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kReportSchema = "causal-glm/1";

}  // namespace causalglm
