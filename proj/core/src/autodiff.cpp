#include "vhl/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace vhl::ad {

Var Tape::push(Mat value, bool requires_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  if (requires_grad) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.requires_grad = requires_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Mat value, bool requires_grad) { return push(std::move(value), requires_grad, {}); }

Var Tape::matvec(Var w, Var x) {
  const bool rg = requires_grad(w) || requires_grad(x);
  Mat out = value(w) * value(x);
  return push(std::move(out), rg, [w, x](Tape& t, const Mat& g) {
    if (t.requires_grad(w)) t.grad_ref(w) += g * t.value(x).transpose();
    if (t.requires_grad(x)) t.grad_ref(x) += t.value(w).transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) + value(b), rg, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var Tape::sub(Var a, Var b) {
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a) - value(b), rg, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    if (t.requires_grad(b)) t.grad_ref(b) -= g;
  });
}

Var Tape::cmul(Var a, Var b) {
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(value(a).cwiseProduct(value(b)), rg, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_ref(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad_ref(b) += g.cwiseProduct(t.value(a));
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, requires_grad(a), [a, s](Tape& t, const Mat& g) {
    t.accumulate(a, g * s);
  });
}

Var Tape::tanh(Var a) {
  Mat out = value(a).array().tanh().matrix();
  return push(std::move(out), requires_grad(a), [a, self = static_cast<int>(nodes_.size())](
                                                    Tape& t, const Mat& g) {
    const Mat& y = t.nodes_[static_cast<size_t>(self)].value;
    t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

Var Tape::sigmoid(Var a) {
  Mat out = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
  return push(std::move(out), requires_grad(a), [a, self = static_cast<int>(nodes_.size())](
                                                    Tape& t, const Mat& g) {
    const Mat& y = t.nodes_[static_cast<size_t>(self)].value;
    t.accumulate(a, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Var Tape::row_as_col(Var m, int row) {
  Mat out = value(m).row(row).transpose();
  return push(std::move(out), requires_grad(m), [m, row](Tape& t, const Mat& g) {
    if (t.requires_grad(m)) t.grad_ref(m).row(row) += g.transpose();
  });
}

Var Tape::concat(const std::vector<Var>& xs) {
  long rows = 0;
  bool rg = false;
  for (Var x : xs) {
    rows += value(x).rows();
    rg = rg || requires_grad(x);
  }
  Mat out(rows, 1);
  long at = 0;
  for (Var x : xs) {
    out.block(at, 0, value(x).rows(), 1) = value(x);
    at += value(x).rows();
  }
  return push(std::move(out), rg, [xs](Tape& t, const Mat& g) {
    long at = 0;
    for (Var x : xs) {
      const long r = t.value(x).rows();
      if (t.requires_grad(x)) t.grad_ref(x) += g.block(at, 0, r, 1);
      at += r;
    }
  });
}

Var Tape::dot(Var a, Var b) {
  Mat out(1, 1);
  out(0, 0) = value(a).col(0).dot(value(b).col(0));
  const bool rg = requires_grad(a) || requires_grad(b);
  return push(std::move(out), rg, [a, b](Tape& t, const Mat& g) {
    const double s = g(0, 0);
    if (t.requires_grad(a)) t.grad_ref(a) += s * t.value(b);
    if (t.requires_grad(b)) t.grad_ref(b) += s * t.value(a);
  });
}

Var Tape::stack_scalars(const std::vector<Var>& xs) {
  Mat out(static_cast<long>(xs.size()), 1);
  bool rg = false;
  for (size_t i = 0; i < xs.size(); ++i) {
    out(static_cast<long>(i), 0) = value(xs[i])(0, 0);
    rg = rg || requires_grad(xs[i]);
  }
  return push(std::move(out), rg, [xs](Tape& t, const Mat& g) {
    for (size_t i = 0; i < xs.size(); ++i) {
      if (t.requires_grad(xs[i])) t.grad_ref(xs[i])(0, 0) += g(static_cast<long>(i), 0);
    }
  });
}

Var Tape::add_all(const std::vector<Var>& xs) {
  if (xs.empty()) throw std::invalid_argument("add_all: empty input");
  Mat out = value(xs[0]);
  bool rg = requires_grad(xs[0]);
  for (size_t i = 1; i < xs.size(); ++i) {
    out += value(xs[i]);
    rg = rg || requires_grad(xs[i]);
  }
  return push(std::move(out), rg, [xs](Tape& t, const Mat& g) {
    for (Var x : xs) t.accumulate(x, g);
  });
}

Var Tape::mean_of(const std::vector<Var>& xs) {
  Var sum = add_all(xs);
  return scale(sum, 1.0 / static_cast<double>(xs.size()));
}

Var Tape::softmax(Var logits) {
  const Mat& z = value(logits);
  const double zmax = z.maxCoeff();
  Mat e = (z.array() - zmax).exp().matrix();
  const double denom = e.sum();
  Mat out = e / denom;
  return push(std::move(out), requires_grad(logits),
              [logits, self = static_cast<int>(nodes_.size())](Tape& t, const Mat& g) {
                if (!t.requires_grad(logits)) return;
                const Mat& s = t.nodes_[static_cast<size_t>(self)].value;
                const double gs = (g.array() * s.array()).sum();
                t.grad_ref(logits) += (s.array() * (g.array() - gs)).matrix();
              });
}

Var Tape::cross_entropy(Var logits, int target) {
  const Mat& z = value(logits);
  if (target < 0 || target >= z.rows()) {
    throw std::invalid_argument("cross_entropy: target out of range");
  }
  const double zmax = z.maxCoeff();
  const double lse = zmax + std::log((z.array() - zmax).exp().sum());
  Mat out(1, 1);
  out(0, 0) = lse - z(target, 0);
  return push(std::move(out), requires_grad(logits), [logits, target](Tape& t, const Mat& g) {
    if (!t.requires_grad(logits)) return;
    const Mat& z = t.value(logits);
    const double zmax = z.maxCoeff();
    Mat soft = (z.array() - zmax).exp().matrix();
    soft /= soft.sum();
    soft(target, 0) -= 1.0;
    t.grad_ref(logits) += g(0, 0) * soft;
  });
}

Var Tape::patch_means(Var pixels, int width, int height, int grid) {
  if (width % grid != 0 || height % grid != 0) {
    throw std::invalid_argument("patch_means: resolution not divisible by grid");
  }
  const Mat& px = value(pixels);
  if (px.rows() != static_cast<long>(width) * height * 3) {
    throw std::invalid_argument("patch_means: pixel vector shape mismatch");
  }
  const int pw = width / grid;
  const int ph = height / grid;
  const double inv_count = 1.0 / (pw * ph);
  Mat out = Mat::Zero(static_cast<long>(grid) * grid * 3, 1);
  for (int y = 0; y < height; ++y) {
    const int gy = y / ph;
    for (int x = 0; x < width; ++x) {
      const int gx = x / pw;
      const long base_out = (static_cast<long>(gy) * grid + gx) * 3;
      const long base_in = (static_cast<long>(y) * width + x) * 3;
      for (int c = 0; c < 3; ++c) out(base_out + c, 0) += px(base_in + c, 0) * inv_count;
    }
  }
  return push(std::move(out), requires_grad(pixels),
              [pixels, width, height, grid, pw, ph, inv_count](Tape& t, const Mat& g) {
                if (!t.requires_grad(pixels)) return;
                Mat& gp = t.grad_ref(pixels);
                for (int y = 0; y < height; ++y) {
                  const int gy = y / ph;
                  for (int x = 0; x < width; ++x) {
                    const int gx = x / pw;
                    const long base_out = (static_cast<long>(gy) * grid + gx) * 3;
                    const long base_in = (static_cast<long>(y) * width + x) * 3;
                    for (int c = 0; c < 3; ++c) {
                      gp(base_in + c, 0) += g(base_out + c, 0) * inv_count;
                    }
                  }
                }
              });
}

void Tape::backward(Var out) {
  Node& last = nodes_[static_cast<size_t>(out.id)];
  if (last.value.rows() != 1 || last.value.cols() != 1) {
    throw std::invalid_argument("backward: output must be scalar");
  }
  if (!last.requires_grad) return;
  last.grad(0, 0) = 1.0;
  for (int i = out.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.requires_grad || !n.back) continue;
    n.back(*this, n.grad);
  }
}

}  // namespace vhl::ad
