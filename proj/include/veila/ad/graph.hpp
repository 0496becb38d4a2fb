#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "veila/core/tensor.hpp"

namespace veila::ad {

// Define-by-run reverse-mode tape. Ops execute eagerly and record a backward
// closure; backward() runs them in reverse topological order. Backward
// closures must ACCUMULATE into parent grads.
template <class T>
struct Node {
  Tensor<T> val;
  Tensor<T> grad;  // lazily allocated
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> back;
  bool requires_grad = false;

  Tensor<T>& g() {
    if (!grad.defined()) grad = Tensor<T>::zeros(val.shape());
    return grad;
  }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> constant(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(v);
  n->requires_grad = false;
  return n;
}

// A differentiable leaf (parameter or probed input).
template <class T>
Var<T> leaf(Tensor<T> v) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(v);
  n->requires_grad = true;
  return n;
}

template <class T>
Var<T> make_op(Tensor<T> out, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> back) {
  auto n = std::make_shared<Node<T>>();
  n->val = std::move(out);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  if (n->requires_grad) n->back = std::move(back);
  return n;
}

template <class T>
std::vector<Node<T>*> topo_order(const Var<T>& root) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{root.get(), 0}};
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;  // parents before children
}

// Seed the root with grad_out (or ones for a scalar) and propagate.
template <class T>
void backward(const Var<T>& root, Tensor<T> grad_out = {}) {
  VEILA_CHECK(root->requires_grad, "backward from a non-differentiable node");
  if (!grad_out.defined()) {
    VEILA_CHECK(root->val.numel() == 1, "implicit grad seed needs a scalar root");
    grad_out = Tensor<T>::full(root->val.shape(), T(1));
  }
  VEILA_CHECK(grad_out.shape() == root->val.shape(), "grad seed shape mismatch");
  root->g();
  for (i64 i = 0; i < grad_out.numel(); ++i) root->grad[i] += grad_out[i];
  auto order = topo_order(root);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->back && n->grad.defined()) n->back(*n);
  }
}

}  // namespace veila::ad
