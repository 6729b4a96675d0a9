#include "phylogauss/tree.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <unordered_map>
#include <unordered_set>

namespace phylogauss {

NewickError::NewickError(const std::string& msg, std::size_t off)
    : std::runtime_error(msg + " (byte " + std::to_string(off) + ")"), offset(off) {}

PhyloTree::PhyloTree(std::vector<TreeNode> nodes, int root)
    : nodes_(std::move(nodes)), root_(root) {
  const int m = node_count();
  if (root_ < 0 || root_ >= m) throw std::invalid_argument("PhyloTree: bad root id");

  heights_.assign(m, 0.0);
  pre_order_.reserve(m);
  post_order_.reserve(m);

  // Iterative pre-order; children pushed in reverse so they pop in order.
  std::vector<int> stack{root_};
  std::vector<char> seen(m, 0);
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (seen[id]) throw std::invalid_argument("PhyloTree: cycle detected");
    seen[id] = 1;
    const TreeNode& nd = nodes_[id];
    if (id != root_) {
      if (nd.parent < 0 || nd.parent >= m) throw std::invalid_argument("PhyloTree: bad parent id");
      if (nd.branch_length < 0) throw std::invalid_argument("PhyloTree: negative branch length");
      heights_[id] = heights_[nd.parent] + nd.branch_length;
    }
    pre_order_.push_back(id);
    for (auto it = nd.children.rbegin(); it != nd.children.rend(); ++it) stack.push_back(*it);
  }
  if (static_cast<int>(pre_order_.size()) != m) {
    throw std::invalid_argument("PhyloTree: graph not connected");
  }
  post_order_.assign(pre_order_.rbegin(), pre_order_.rend());

  std::unordered_set<std::string> tip_names;
  for (int id = 0; id < m; ++id) {
    if (!is_tip(id)) continue;
    tips_.push_back(id);
    if (nodes_[id].name.empty()) throw std::invalid_argument("PhyloTree: unnamed tip");
    if (!tip_names.insert(nodes_[id].name).second) {
      throw std::invalid_argument("PhyloTree: duplicate tip name '" + nodes_[id].name + "'");
    }
    max_tip_height_ = std::max(max_tip_height_, heights_[id]);
  }
  for (int id = 0; id < m; ++id) {
    for (int c : nodes_[id].children) {
      if (nodes_[c].parent != id) throw std::invalid_argument("PhyloTree: inconsistent adjacency");
    }
  }
}

int PhyloTree::tip_id(const std::string& name) const {
  for (int id : tips_) {
    if (nodes_[id].name == name) return id;
  }
  throw std::out_of_range("PhyloTree: unknown tip '" + name + "'");
}

namespace {

struct NewickScanner {
  const std::string& text;
  std::size_t pos = 0;

  explicit NewickScanner(const std::string& t) : text(t) {}

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  void skip_space_and_comments() {
    while (!done()) {
      if (std::isspace(static_cast<unsigned char>(text[pos]))) {
        ++pos;
      } else if (text[pos] == '[') {
        const std::size_t open = pos;
        while (!done() && text[pos] != ']') ++pos;
        if (done()) throw NewickError("unterminated [comment]", open);
        ++pos;
      } else {
        break;
      }
    }
  }

  std::string read_label() {
    skip_space_and_comments();
    std::string out;
    while (!done()) {
      const char c = text[pos];
      if (c == ':' || c == ',' || c == '(' || c == ')' || c == ';' || c == '[' ||
          std::isspace(static_cast<unsigned char>(c))) {
        break;
      }
      out.push_back(c);
      ++pos;
    }
    return out;
  }

  double read_branch_length() {
    skip_space_and_comments();
    const std::size_t start = pos;
    char* end = nullptr;
    const double v = std::strtod(text.c_str() + pos, &end);
    if (end == text.c_str() + pos) throw NewickError("expected branch length", start);
    pos = static_cast<std::size_t>(end - text.c_str());
    if (!std::isfinite(v) || v < 0) throw NewickError("invalid branch length", start);
    return v;
  }
};

}  // namespace

PhyloTree parse_newick(const std::string& text) {
  NewickScanner sc(text);
  sc.skip_space_and_comments();
  if (sc.done()) throw NewickError("empty input", 0);

  std::vector<TreeNode> nodes;
  // Parses the subtree starting at the current position, returns its node id.
  auto parse_clade = [&](auto&& self) -> int {
    sc.skip_space_and_comments();
    if (sc.done()) throw NewickError("unexpected end of input", sc.pos);
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (sc.peek() == '(') {
      const std::size_t open = sc.pos;
      ++sc.pos;
      while (true) {
        const int child = self(self);
        nodes[id].children.push_back(child);
        nodes[child].parent = id;
        sc.skip_space_and_comments();
        if (sc.done()) throw NewickError("unbalanced parentheses", open);
        if (sc.peek() == ',') {
          ++sc.pos;
          continue;
        }
        if (sc.peek() == ')') {
          ++sc.pos;
          break;
        }
        throw NewickError("expected ',' or ')'", sc.pos);
      }
      nodes[id].name = sc.read_label();  // optional internal label
    } else {
      if (sc.peek() == ')' || sc.peek() == ',') throw NewickError("expected taxon name", sc.pos);
      nodes[id].name = sc.read_label();
      if (nodes[id].name.empty()) throw NewickError("expected taxon name", sc.pos);
    }
    sc.skip_space_and_comments();
    if (!sc.done() && sc.peek() == ':') {
      ++sc.pos;
      nodes[id].branch_length = sc.read_branch_length();
    } else if (nodes[id].children.empty()) {
      throw NewickError("missing branch length", sc.pos);
    } else {
      nodes[id].branch_length = -1.0;  // flag: must be the root
    }
    return id;
  };

  const int root = parse_clade(parse_clade);
  sc.skip_space_and_comments();
  if (sc.done() || sc.peek() != ';') throw NewickError("expected terminating ';'", sc.pos);
  ++sc.pos;
  sc.skip_space_and_comments();
  if (!sc.done()) throw NewickError("trailing content after ';'", sc.pos);

  for (int id = 0; id < static_cast<int>(nodes.size()); ++id) {
    if (nodes[id].branch_length < 0) {
      if (id != root) throw NewickError("missing branch length on internal edge", text.size());
      nodes[id].branch_length = 0.0;
    }
  }
  nodes[root].branch_length = 0.0;  // root edge carries no time

  try {
    return PhyloTree(std::move(nodes), root);
  } catch (const std::invalid_argument& e) {
    throw NewickError(e.what(), text.size());
  }
}

namespace {

void write_clade(const PhyloTree& tree, int id, std::string& out) {
  const TreeNode& nd = tree.node(id);
  if (!nd.children.empty()) {
    out.push_back('(');
    for (std::size_t i = 0; i < nd.children.size(); ++i) {
      if (i > 0) out.push_back(',');
      write_clade(tree, nd.children[i], out);
    }
    out.push_back(')');
  }
  out += nd.name;
  char buf[40];
  std::snprintf(buf, sizeof(buf), ":%.17g", nd.branch_length);
  out += buf;
}

}  // namespace

std::string to_newick(const PhyloTree& tree) {
  std::string out;
  write_clade(tree, tree.root(), out);
  out.push_back(';');
  return out;
}

std::pair<PhyloTree, double> normalize_height(const PhyloTree& tree) {
  const double scale = tree.max_tip_height();
  if (scale <= 0) throw std::domain_error("normalize_height: zero-height tree");
  std::vector<TreeNode> nodes;
  nodes.reserve(tree.node_count());
  for (int id = 0; id < tree.node_count(); ++id) {
    TreeNode nd = tree.node(id);
    nd.branch_length /= scale;
    nodes.push_back(std::move(nd));
  }
  return {PhyloTree(std::move(nodes), tree.root()), scale};
}

PhyloTree pagel_lambda_rescale(const PhyloTree& tree, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::domain_error("pagel_lambda_rescale: lambda outside [0,1]");
  }
  std::vector<TreeNode> nodes;
  nodes.reserve(tree.node_count());
  for (int id = 0; id < tree.node_count(); ++id) {
    TreeNode nd = tree.node(id);
    if (id != tree.root()) {
      if (tree.is_tip(id)) {
        nd.branch_length = lambda * nd.branch_length + (1.0 - lambda) * tree.height(id);
      } else {
        nd.branch_length = lambda * nd.branch_length;
      }
    }
    nodes.push_back(std::move(nd));
  }
  return PhyloTree(std::move(nodes), tree.root());
}

int mrca(const PhyloTree& tree, int a, int b) {
  std::unordered_set<int> ancestors;
  for (int cur = a; cur != -1; cur = tree.node(cur).parent) ancestors.insert(cur);
  for (int cur = b; cur != -1; cur = tree.node(cur).parent) {
    if (ancestors.count(cur)) return cur;
  }
  throw std::logic_error("mrca: disconnected nodes");
}

double shared_time(const PhyloTree& tree, int tip_i, int tip_j) {
  if (!tree.is_tip(tip_i) || !tree.is_tip(tip_j)) {
    throw std::invalid_argument("shared_time: arguments must be tips");
  }
  if (tip_i == tip_j) return tree.height(tip_i);
  return tree.height(mrca(tree, tip_i, tip_j));
}

double shared_time(const PhyloTree& tree, const std::string& a, const std::string& b) {
  return shared_time(tree, tree.tip_id(a), tree.tip_id(b));
}

}  // namespace phylogauss
