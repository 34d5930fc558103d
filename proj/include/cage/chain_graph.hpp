#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cage {

enum class ComponentMode { confounded, interacting };

std::string to_string(ComponentMode mode);
ComponentMode component_mode_from_string(const std::string& s);

struct ChainComponent {
    std::vector<std::string> members;
    ComponentMode mode;
};

// Ordered partition of the feature universe into chain components. The
// component order is the partial causal order; structure inside a component
// is unknown and summarized only by its mode.
class ChainGraph {
public:
    // Validates that the components partition the universe exactly; error
    // messages name the offending feature.
    ChainGraph(std::vector<ChainComponent> components, std::vector<std::string> feature_universe);

    static std::vector<ChainComponent> parse_components(std::istream& in,
                                                        const std::string& origin = "<stream>");
    // Universe comes from the dataset the graph is applied to.
    static ChainGraph load(const std::string& path, std::vector<std::string> feature_universe);
    void write_definition(std::ostream& out) const;

    std::size_t component_count() const { return components_.size(); }
    const ChainComponent& component(std::size_t t) const;
    const std::vector<ChainComponent>& components() const { return components_; }
    const std::vector<std::string>& feature_universe() const { return universe_; }

    // Union of the members of all components strictly before t (0-based),
    // in universe order: the densest parent set consistent with the
    // component ordering.
    std::vector<std::string> parents_of(std::size_t t) const;

    // Index of the component containing the feature.
    std::size_t component_of(const std::string& feature) const;

private:
    std::vector<ChainComponent> components_;
    std::vector<std::string> universe_;
};

}  // namespace cage
