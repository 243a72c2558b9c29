#include "iw/csv.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace iw::csv {

std::optional<std::vector<std::string>> read_record(std::istream& in) {
    int c = in.get();
    if (c == EOF) {
        return std::nullopt;
    }
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    while (true) {
        if (c == EOF) {
            break;
        }
        if (quoted) {
            if (c == '"') {
                const int next = in.peek();
                if (next == '"') { // escaped quote
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(static_cast<char>(c));
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            break;
        } else if (c == '\r') {
            if (in.peek() == '\n') {
                in.get();
            }
            break;
        } else {
            field.push_back(static_cast<char>(c));
        }
        c = in.get();
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

void write_record(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out.put(',');
        }
        out << escape(fields[i]);
    }
    out.put('\n');
}

std::string format_double(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    // Shortest representation that parses back exactly.
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            return buf;
        }
    }
    return buf;
}

double parse_double(const std::string& s) {
    if (s == "nan") {
        return std::nan("");
    }
    if (s == "inf") {
        return HUGE_VAL;
    }
    if (s == "-inf") {
        return -HUGE_VAL;
    }
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0') {
        throw std::invalid_argument("not a number: '" + s + "'");
    }
    return v;
}

long parse_long(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0') {
        throw std::invalid_argument("not an integer: '" + s + "'");
    }
    return v;
}

} // namespace iw::csv
