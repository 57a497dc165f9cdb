#include "mrlab/toml.hpp"

#include "mrlab/common.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <vector>

namespace mrlab {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : s_(text) {}

    Json run() {
        Json root = Json::object();
        Json* table = &root;
        while (true) {
            skip_blank_lines();
            if (eof()) break;
            if (peek() == '[') {
                table = header(root);
            } else {
                key_value(*table);
            }
            end_of_line();
        }
        return root;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw InvalidArgument("config line " + std::to_string(line_) + ": " + msg);
    }
    bool eof() const { return pos_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[pos_]; }
    char get() {
        const char c = s_[pos_++];
        if (c == '\n') ++line_;
        return c;
    }
    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
    }
    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') ++pos_;
    }
    // whitespace, newlines and comments (inside arrays and between statements)
    void skip_blank_lines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n' || peek() == '\r')
                get();
            else
                break;
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (peek() == '\r') get();
        if (eof()) return;
        if (peek() != '\n') fail(std::string("unexpected '") + peek() + "'");
        get();
    }

    std::string bare_or_quoted_key() {
        skip_ws();
        if (peek() == '"') return basic_string();
        if (peek() == '\'') return literal_string();
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-'))
            k += get();
        if (k.empty()) fail("expected a key");
        return k;
    }
    std::vector<std::string> dotted_key() {
        std::vector<std::string> parts{bare_or_quoted_key()};
        skip_ws();
        while (peek() == '.') {
            get();
            parts.push_back(bare_or_quoted_key());
            skip_ws();
        }
        return parts;
    }

    // descends through (and creates) intermediate tables; arrays of tables resolve to their last element
    Json* descend(Json* t, const std::string& k, std::string* path = nullptr) {
        if (!t->contains(k)) (*t)[k] = Json::object();
        Json* next = &(*t)[k];
        if (path) *path += "\x1f" + k;
        if (next->is_array()) {
            if (next->empty() || !next->back().is_object()) fail("key '" + k + "' is not a table");
            if (path) *path += "#" + std::to_string(next->size());
            next = &next->back();
        }
        if (!next->is_object()) fail("key '" + k + "' is not a table");
        return next;
    }

    Json* header(Json& root) {
        get();
        const bool array = peek() == '[';
        if (array) get();
        const auto parts = dotted_key();
        skip_ws();
        if (get() != ']' || (array && get() != ']')) fail("malformed table header");
        Json* t = &root;
        std::string path;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = descend(t, parts[i], &path);
        const std::string& last = parts.back();
        path += "\x1f" + last;
        if (array) {
            if (!t->contains(last)) (*t)[last] = Json::array();
            Json& arr = (*t)[last];
            if (!arr.is_array()) fail("'" + last + "' redefined as an array of tables");
            arr.push_back(Json::object());
            return &arr.back();
        }
        if (t->contains(last)) {
            Json& existing = (*t)[last];
            if (!existing.is_object() || !defined_.insert(path).second) fail("table '" + last + "' defined twice");
            return &existing;
        }
        (*t)[last] = Json::object();
        defined_.insert(path);
        return &(*t)[last];
    }

    void key_value(Json& table) {
        const auto parts = dotted_key();
        skip_ws();
        if (get() != '=') fail("expected '=' after key");
        skip_ws();
        Json* t = &table;
        for (std::size_t i = 0; i + 1 < parts.size(); ++i) t = descend(t, parts[i]);
        if (t->contains(parts.back())) fail("duplicate key '" + parts.back() + "'");
        (*t)[parts.back()] = value();
    }

    Json value() {
        skip_ws();
        const char c = peek();
        if (c == '"') return basic_string();
        if (c == '\'') return literal_string();
        if (c == '[') return array();
        if (c == '{') return inline_table();
        return scalar();
    }

    std::string basic_string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            char c = get();
            if (c == '"') return out;
            if (c != '\\') {
                out += c;
                continue;
            }
            if (eof()) fail("unterminated escape");
            c = get();
            switch (c) {
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                case 'r': out += '\r'; break;
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                default: fail(std::string("unsupported escape \\") + c);
            }
        }
    }
    std::string literal_string() {
        get();
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '\'') return out;
            out += c;
        }
    }

    Json array() {
        get();
        Json arr = Json::array();
        while (true) {
            skip_blank_lines();
            if (peek() == ']') {
                get();
                return arr;
            }
            arr.push_back(value());
            skip_blank_lines();
            if (peek() == ',') {
                get();
            } else if (peek() != ']') {
                fail("expected ',' or ']' in array");
            }
        }
    }

    Json inline_table() {
        get();
        Json t = Json::object();
        skip_ws();
        if (peek() == '}') {
            get();
            return t;
        }
        while (true) {
            key_value(t);
            skip_ws();
            const char c = get();
            if (c == '}') return t;
            if (c != ',') fail("expected ',' or '}' in inline table");
        }
    }

    Json scalar() {
        std::string tok;
        while (!eof() && !std::isspace(static_cast<unsigned char>(peek())) && peek() != ',' && peek() != ']' &&
               peek() != '}' && peek() != '#')
            tok += get();
        if (tok.empty()) fail("expected a value");
        if (tok == "true") return true;
        if (tok == "false") return false;
        std::string t;
        for (char c : tok)
            if (c != '_') t += c;
        std::string body = t;
        bool neg = false;
        if (!body.empty() && (body[0] == '+' || body[0] == '-')) {
            neg = body[0] == '-';
            body = body.substr(1);
        }
        if (body == "inf") return neg ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        if (body == "nan") return std::numeric_limits<double>::quiet_NaN();
        const bool is_float = t.find_first_of(".eE") != std::string::npos;
        if (!is_float) {
            std::int64_t v = 0;
            const auto r = std::from_chars(t.data() + (t[0] == '+' ? 1 : 0), t.data() + t.size(), v);
            if (r.ec != std::errc() || r.ptr != t.data() + t.size()) fail("invalid value '" + tok + "'");
            return v;
        }
        double v = 0.0;
        const auto r = std::from_chars(t.data() + (t[0] == '+' ? 1 : 0), t.data() + t.size(), v);
        if (r.ec != std::errc() || r.ptr != t.data() + t.size()) fail("invalid value '" + tok + "'");
        return v;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::set<std::string> defined_;  // explicitly opened table paths
};

}  // namespace

Json parse_toml(std::string_view text) { return Parser(text).run(); }

Json load_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

}  // namespace mrlab
