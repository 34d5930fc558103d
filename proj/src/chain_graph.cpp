#include "cage/chain_graph.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cage/error.hpp"

namespace cage {

std::string to_string(ComponentMode mode) {
    return mode == ComponentMode::confounded ? "confounded" : "interacting";
}

ComponentMode component_mode_from_string(const std::string& s) {
    if (s == "confounded") return ComponentMode::confounded;
    if (s == "interacting") return ComponentMode::interacting;
    throw Error("chain graph: unknown mode '" + s + "' (expected confounded|interacting)");
}

ChainGraph::ChainGraph(std::vector<ChainComponent> components,
                       std::vector<std::string> feature_universe)
    : components_(std::move(components)), universe_(std::move(feature_universe)) {
    std::unordered_set<std::string> universe_set(universe_.begin(), universe_.end());
    if (universe_set.size() != universe_.size())
        throw Error("chain graph: feature universe contains duplicates");
    std::unordered_set<std::string> seen;
    for (std::size_t t = 0; t < components_.size(); ++t) {
        if (components_[t].members.empty())
            throw Error("chain graph: component " + std::to_string(t + 1) + " is empty");
        for (const auto& f : components_[t].members) {
            if (!universe_set.count(f))
                throw Error("chain graph: unknown feature '" + f + "'");
            if (!seen.insert(f).second)
                throw Error("chain graph: feature '" + f + "' appears in more than one component");
        }
    }
    for (const auto& f : universe_)
        if (!seen.count(f))
            throw Error("chain graph: feature '" + f + "' missing from all components");
}

const ChainComponent& ChainGraph::component(std::size_t t) const {
    if (t >= components_.size())
        throw Error("chain graph: component index " + std::to_string(t) + " out of range");
    return components_[t];
}

std::vector<std::string> ChainGraph::parents_of(std::size_t t) const {
    if (t >= components_.size())
        throw Error("chain graph: component index " + std::to_string(t) + " out of range");
    std::unordered_set<std::string> members;
    for (std::size_t k = 0; k < t; ++k)
        members.insert(components_[k].members.begin(), components_[k].members.end());
    std::vector<std::string> out;
    for (const auto& f : universe_)
        if (members.count(f)) out.push_back(f);
    return out;
}

std::size_t ChainGraph::component_of(const std::string& feature) const {
    for (std::size_t t = 0; t < components_.size(); ++t)
        if (std::find(components_[t].members.begin(), components_[t].members.end(), feature) !=
            components_[t].members.end())
            return t;
    throw Error("chain graph: unknown feature '" + feature + "'");
}

// ---------------------------------------------------------------------------
// Config file format: ordered [component] blocks with
//   members = [name, name, ...]
//   mode = confounded|interacting

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<ChainComponent> ChainGraph::parse_components(std::istream& in,
                                                         const std::string& origin) {
    std::vector<ChainComponent> components;
    bool in_block = false;
    bool have_mode = false;
    std::string line;
    long line_no = 0;
    auto fail = [&](const std::string& what) {
        throw Error("chain graph: " + origin + ":" + std::to_string(line_no) + ": " + what);
    };
    auto close_block = [&]() {
        if (!in_block) return;
        if (components.back().members.empty()) fail("component has no members");
        if (!have_mode) fail("component has no mode (must be set explicitly)");
    };
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line == "[component]") {
            close_block();
            components.push_back(ChainComponent{{}, ComponentMode::confounded});
            in_block = true;
            have_mode = false;
            continue;
        }
        if (!in_block) fail("expected [component] before '" + line + "'");
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key == "members") {
            if (value.size() < 2 || value.front() != '[' || value.back() != ']')
                fail("members must be a [name, ...] list");
            std::stringstream items(value.substr(1, value.size() - 2));
            std::string item;
            while (std::getline(items, item, ',')) {
                item = trim(item);
                if (!item.empty()) components.back().members.push_back(item);
            }
        } else if (key == "mode") {
            components.back().mode = component_mode_from_string(value);
            have_mode = true;
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    close_block();
    if (components.empty())
        throw Error("chain graph: " + origin + ": no components defined");
    return components;
}

ChainGraph ChainGraph::load(const std::string& path, std::vector<std::string> feature_universe) {
    std::ifstream in(path);
    if (!in) throw Error("chain graph: cannot open '" + path + "'");
    return ChainGraph(parse_components(in, path), std::move(feature_universe));
}

void ChainGraph::write_definition(std::ostream& out) const {
    for (const auto& comp : components_) {
        out << "[component]\nmembers = [";
        for (std::size_t i = 0; i < comp.members.size(); ++i)
            out << (i ? ", " : "") << comp.members[i];
        out << "]\nmode = " << to_string(comp.mode) << "\n";
    }
}

}  // namespace cage
