#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace phylogauss {

struct TreeNode {
  std::string name;                // required and unique for tips, optional elsewhere
  int parent = -1;                 // -1 for the root
  double branch_length = 0.0;      // length of the edge above this node, in time units
  std::vector<int> children;
};

class NewickError : public std::runtime_error {
 public:
  NewickError(const std::string& msg, std::size_t offset);
  std::size_t offset;  // byte offset into the input
};

// Rooted phylogenetic tree with time-calibrated branch lengths. Immutable
// after construction; heights and traversal orders are precomputed.
class PhyloTree {
 public:
  PhyloTree(std::vector<TreeNode> nodes, int root);

  int root() const { return root_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  int tip_count() const { return static_cast<int>(tips_.size()); }
  const TreeNode& node(int id) const { return nodes_[id]; }
  bool is_tip(int id) const { return nodes_[id].children.empty(); }
  bool is_root(int id) const { return id == root_; }

  // Time from the root; height(root()) == 0.
  double height(int id) const { return heights_[id]; }
  double max_tip_height() const { return max_tip_height_; }

  // Children listed before parents.
  const std::vector<int>& post_order() const { return post_order_; }
  // Parents listed before children; starts at the root.
  const std::vector<int>& pre_order() const { return pre_order_; }
  // Tip ids, in the order the tips appear in the input.
  const std::vector<int>& tips() const { return tips_; }

  // Node id for a tip name; throws std::out_of_range for unknown names.
  int tip_id(const std::string& name) const;

 private:
  std::vector<TreeNode> nodes_;
  int root_;
  std::vector<double> heights_;
  std::vector<int> post_order_;
  std::vector<int> pre_order_;
  std::vector<int> tips_;
  double max_tip_height_ = 0.0;
};

// Parses a single Newick statement (terminated by ';'). Branch lengths are
// required on all non-root edges; a missing root branch length is treated
// as zero. Square-bracket comments are stripped; internal node labels are
// kept but unused. Polytomies are preserved.
PhyloTree parse_newick(const std::string& text);

// Emits branch lengths with 17 significant digits; parse(serialize(t)) is
// isomorphic to t.
std::string to_newick(const PhyloTree& tree);

// Divides every branch length by the maximum tip height and returns the
// rescaled tree together with that scale. Throws on a zero-height tree.
std::pair<PhyloTree, double> normalize_height(const PhyloTree& tree);

// Pagel's lambda rescaling: internal edges are multiplied by lambda, tip
// edges become lambda*l + (1-lambda)*t_i, so tip heights are unchanged.
PhyloTree pagel_lambda_rescale(const PhyloTree& tree, double lambda);

int mrca(const PhyloTree& tree, int a, int b);

// Height of the most recent common ancestor of two tips; equals the tip
// height when i == j. Tips are given by node id.
double shared_time(const PhyloTree& tree, int tip_i, int tip_j);
double shared_time(const PhyloTree& tree, const std::string& tip_i, const std::string& tip_j);

}  // namespace phylogauss
