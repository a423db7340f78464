#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace camfuse {

/// Failure categories. The CLI maps these onto process exit codes.
enum class Errc {
    argument,
    dimension,
    bounds,
    shape,
    format,
    truncation,
    io,
    dependency,
    plan,
    usage,
    invariant,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message) : std::runtime_error(message), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

// Seed derivation: every stage draws its RNG seed from the experiment seed
// mixed with a stage tag and an index, so streams never overlap and do not
// depend on scheduling order.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0);

/// Worker count used by parallel_for when the caller passes 0.
int default_jobs();
void set_default_jobs(int jobs);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index must write
/// only its own output slot; results are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int jobs = 0);

/// Writes via a sibling temp file and renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer);

}  // namespace camfuse
