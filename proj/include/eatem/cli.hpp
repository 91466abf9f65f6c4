#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "eatem/config.hpp"
#include "eatem/optics.hpp"

namespace eatem::cli {

enum ExitCode : int {
    exit_ok = 0,
    exit_failure = 1,
    exit_config = 2,
    exit_precondition = 3,
    exit_check_failed = 4,
};

struct CheckLine {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Files produced by one command, written together with a manifest listing
/// every file and its FNV-1a hash.
class OutputTree {
public:
    void add(const std::string& name, std::string bytes);
    void note(const std::string& key, const std::string& value);

    /// Writes all files plus manifest.txt under `dir`.
    void write(const std::filesystem::path& dir, const std::string& command, const Config& config) const;
    const std::map<std::string, std::string>& files() const { return m_files; }
    std::string manifest(const std::string& command, const Config& config) const;

private:
    std::map<std::string, std::string> m_files;
    std::vector<std::pair<std::string, std::string>> m_notes;
};

struct CommandOutput {
    OutputTree tree;
    std::vector<CheckLine> checks;
    std::vector<std::string> messages;
};

OpticsConfig optics_config(const Config& config);

CommandOutput cmd_design(const Config& config);
CommandOutput cmd_optics(const Config& config);
CommandOutput cmd_protocol(const Config& config);
CommandOutput cmd_image(const Config& config);
CommandOutput cmd_scaling(const Config& config);

/// Runs one subcommand, writes its outputs and maps errors onto exit codes.
int run(std::string_view command, const Config& config, const std::filesystem::path& out_dir, bool check,
    std::ostream& out, std::ostream& err);

}  // namespace eatem::cli
