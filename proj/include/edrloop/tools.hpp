#pragma once

#include <optional>
#include <string>
#include <vector>

#include "edrloop/loop.hpp"

namespace edrloop {

// Best-survival ENTRY->OBJECTIVE path using at most max_hops edges.
// Polynomial DP on acyclic graphs; bounded DFS (max_hops <= 24) otherwise.
struct WeakPath {
    bool found = false;
    std::vector<std::string> node_sequence;
    std::vector<std::string> edge_sequence;
    double survival = 0.0;
    int hops = 0;
};

WeakPath find_weakest_path(const AttackGraph& g, int max_hops);

enum class Role { Defender, Adversary };

const char* role_name(Role r);

// One side of the control loop behind a line-oriented JSON protocol.
// Requests:  {"id": <any>, "tool": "<name>", "params": {...}}
// Responses: {"id": <echoed>, "ok": true, "result": {...}}
//          | {"id": <echoed>, "ok": false, "error": {"code", "message"}}
// Error codes: OFF_CATALOG, BUDGET, BYPASS, UNKNOWN_TOOL, BAD_PARAMS.
//
// Read-only tools never touch loop state. Action verbs stage moves; end_turn
// plays the staged moves (the internal controller plays the other side) and
// returns the round record. Defender responses never expose dark-edge
// identities, only counts.
class ToolSession {
public:
    ToolSession(LoopState state, Role role); // throws ParamError on role/mode mismatch

    Role role() const { return role_; }
    const LoopState& state() const { return st_; }
    LoopState& state_mut() { return st_; }

    std::string handshake_line() const;
    std::vector<std::string> tool_names() const;

    // One NDJSON request -> one NDJSON response (no trailing newline).
    std::string handle_line(const std::string& line);

private:
    LoopState st_;
    Role role_;
    std::vector<DefenderAction> staged_;
    std::optional<AdversaryProposal> staged_move_; // pass or edge

    friend struct ToolSessionAccess;
};

} // namespace edrloop
