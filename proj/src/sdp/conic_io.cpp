// SPDX-License-Identifier: Apache-2.0
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "risloc/sdp.hpp"

namespace risloc::sdp {

namespace {

constexpr const char* kMagic = "risloc-conic";
constexpr int kVersion = 1;

void write_sparse_vector(std::ostream& out, const char* tag, const RVec& v) {
  int nnz = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) nnz += v[i] != 0.0;
  out << tag << ' ' << nnz << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) out << i << ' ' << v[i] << '\n';
}

void write_sym(std::ostream& out, const char* tag, const RMat& a) {
  int nnz = 0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j) nnz += a(i, j) != 0.0;
  out << tag << ' ' << nnz << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = i; j < a.cols(); ++j)
      if (a(i, j) != 0.0) out << i << ' ' << j << ' ' << a(i, j) << '\n';
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void expect(const std::string& word) {
    std::string tok;
    if (!(in_ >> tok) || tok != word)
      throw std::runtime_error("conic file: expected '" + word + "', found '" + tok + "'");
  }
  template <class T>
  T value(const char* what) {
    T v{};
    if (!(in_ >> v)) throw std::runtime_error(std::string("conic file: cannot read ") + what);
    return v;
  }
  long index(const char* what, long bound) {
    const long v = value<long>(what);
    if (v < 0 || v >= bound) throw std::runtime_error(std::string("conic file: ") + what + " out of range");
    return v;
  }
  RVec sparse_vector(const char* tag, long n) {
    expect(tag);
    const long nnz = value<long>("entry count");
    RVec v = RVec::Zero(n);
    for (long k = 0; k < nnz; ++k) {
      const long i = index("vector index", n);
      v[i] = value<double>("vector value");
    }
    return v;
  }
  RMat sym(const char* tag, long n) {
    expect(tag);
    const long nnz = value<long>("entry count");
    RMat a = RMat::Zero(n, n);
    for (long k = 0; k < nnz; ++k) {
      const long i = index("row", n), j = index("column", n);
      a(i, j) = a(j, i) = value<double>("matrix value");
    }
    return a;
  }

 private:
  std::istream& in_;
};

}  // namespace

void write_conic(std::ostream& out, const StandardForm& sf) {
  const auto old_flags = out.flags();
  const auto old_prec = out.precision();
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "m " << sf.m << '\n';
  out << "c0 " << sf.c0 << '\n';
  write_sparse_vector(out, "c", sf.c);
  out << "equalities " << sf.e.rows() << '\n';
  for (Eigen::Index r = 0; r < sf.e.rows(); ++r) {
    out << "rhs " << sf.f[r] << '\n';
    write_sparse_vector(out, "row", sf.e.row(r).transpose());
  }
  out << "blocks " << sf.blocks.size() << '\n';
  for (const auto& b : sf.blocks) {
    if (b.plain) {
      out << "plain " << b.p.n << ' ' << (b.p.hermitian ? 1 : 0) << ' ' << b.p.offset << '\n';
      continue;
    }
    out << "affine " << b.a.constant.rows() << ' ' << b.a.basis.size() << '\n';
    write_sym(out, "constant", b.a.constant);
    for (size_t j = 0; j < b.a.basis.size(); ++j) {
      write_sym(out, "basis", b.a.basis[j]);
      write_sparse_vector(out, "row", b.a.t.row(static_cast<Eigen::Index>(j)).transpose());
    }
  }
  out << "end\n";
  out.flags(old_flags);
  out.precision(old_prec);
}

StandardForm read_conic(std::istream& in) {
  Reader r(in);
  r.expect(kMagic);
  const int version = r.value<int>("version");
  if (version != kVersion) throw std::runtime_error("conic file: unsupported version " + std::to_string(version));
  StandardForm sf;
  r.expect("m");
  const long m = r.value<long>("m");
  if (m < 0) throw std::runtime_error("conic file: negative m");
  sf.m = static_cast<int>(m);
  r.expect("c0");
  sf.c0 = r.value<double>("c0");
  sf.c = r.sparse_vector("c", m);
  r.expect("equalities");
  const long ne = r.value<long>("equality count");
  if (ne < 0) throw std::runtime_error("conic file: negative equality count");
  sf.e = RMat::Zero(ne, m);
  sf.f = RVec::Zero(ne);
  for (long i = 0; i < ne; ++i) {
    r.expect("rhs");
    sf.f[i] = r.value<double>("rhs");
    sf.e.row(i) = r.sparse_vector("row", m).transpose();
  }
  r.expect("blocks");
  const long nb = r.value<long>("block count");
  if (nb < 0) throw std::runtime_error("conic file: negative block count");
  for (long k = 0; k < nb; ++k) {
    StandardForm::Block b;
    const std::string kind = r.value<std::string>("block kind");
    if (kind == "plain") {
      b.plain = true;
      b.p.n = r.value<int>("block size");
      b.p.hermitian = r.value<int>("hermitian flag") != 0;
      b.p.offset = r.value<int>("offset");
      if (b.p.n < 1 || b.p.offset < 0 || b.p.offset + b.p.count() > m)
        throw std::runtime_error("conic file: variable block outside the parameter range");
    } else if (kind == "affine") {
      b.plain = false;
      const long d = r.value<long>("block size");
      const long nbasis = r.value<long>("basis count");
      if (d < 1 || nbasis < 0) throw std::runtime_error("conic file: bad affine block header");
      b.a.constant = r.sym("constant", d);
      b.a.t = RMat::Zero(nbasis, m);
      for (long j = 0; j < nbasis; ++j) {
        b.a.basis.push_back(r.sym("basis", d));
        b.a.t.row(j) = r.sparse_vector("row", m).transpose();
      }
    } else {
      throw std::runtime_error("conic file: unknown block kind '" + kind + "'");
    }
    sf.blocks.push_back(std::move(b));
  }
  r.expect("end");
  return sf;
}

}  // namespace risloc::sdp
