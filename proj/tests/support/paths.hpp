#pragma once

#include <filesystem>

namespace simucheck::testing {

inline std::filesystem::path source_dir()
{
    return SIMUCHECK_SOURCE_DIR;
}

inline std::filesystem::path corpus_dir()
{
    return source_dir() / "corpus";
}

} // namespace simucheck::testing
