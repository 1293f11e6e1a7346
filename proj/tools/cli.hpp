#ifndef IAMSEQ_TOOLS_CLI_HPP_
#define IAMSEQ_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace iamseq::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Runs one command line (args excludes the program name). Errors are
// reported on `err` as a single "ERR:<category>: <message>" line and mapped
// to the exit codes above.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace iamseq::cli

#endif  // IAMSEQ_TOOLS_CLI_HPP_
