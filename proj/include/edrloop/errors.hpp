#pragma once

#include <stdexcept>
#include <string>

namespace edrloop {

// Malformed or schema-violating input. `where` is a JSON-pointer-style path
// (nodes[3].stage, edges[e012].block) or a byte offset for parse failures.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string where, const std::string& what)
        : std::runtime_error(where + ": " + what), where_(std::move(where)) {}
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

// Out-of-domain argument to an operation (R <= 0, k < 0, ...).
class ParamError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace edrloop
