#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace replayrec::csv {

// Reads one logical CSV record (quoted fields may span lines). Returns
// nullopt at end of input. `line_no` is advanced by the physical lines read.
std::optional<std::vector<std::string>> read_record(std::istream& in,
                                                    char delim,
                                                    std::size_t& line_no);

// Quotes a field only when it contains the delimiter, a quote or a newline.
std::string escape(std::string_view field, char delim = ',');

void write_record(std::ostream& out, const std::vector<std::string>& fields,
                  char delim = ',');

std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, char sep);

}  // namespace replayrec::csv
