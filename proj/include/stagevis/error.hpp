#pragma once

#include <stdexcept>
#include <string>

namespace stagevis {

// Library-wide error. `stage` attributes a failure to the pipeline stage it
// occurred in ("retrieval", "reranking", "generation", "optimization", ...);
// empty when the error is not stage-specific.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message, std::string stage = "")
        : std::runtime_error(message), stage_(std::move(stage)) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

}  // namespace stagevis
