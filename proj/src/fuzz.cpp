#include "ivl/fuzz.hpp"

#include <random>
#include <sstream>

#include "ivl/corpus.hpp"

namespace ivl {

namespace {

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(uint64_t seed) : rng(seed) {}

    int pick(int n) { return static_cast<int>(rng() % static_cast<uint64_t>(n)); }
    bool chance(int percent) { return pick(100) < percent; }

    int n_data = 0;
    std::vector<int> data_fields;     // field count per data class
    std::vector<bool> data_has_inv;
    int n_box = 0;
    std::vector<int> box_target;      // data class index per box class

    std::string emit_classes() {
        std::ostringstream os;
        n_data = 1 + pick(2);
        data_fields.clear();
        data_has_inv.clear();
        for (int d = 0; d < n_data; ++d) {
            int nf = 1 + pick(3);
            bool inv = d == 0 || chance(70);  // at least one declared invariant
            data_fields.push_back(nf);
            data_has_inv.push_back(inv);
            os << "class D" << d << " {\n";
            for (int f = 0; f < nf; ++f) os << "  Int f" << f << ";\n";
            os << "  D" << d << "(";
            for (int f = 0; f < nf; ++f)
                os << (f ? ", " : "") << "Int f" << f;
            os << ") {\n";
            for (int f = 0; f < nf; ++f)
                os << "    this.f" << f << " = f" << f << ";\n";
            os << "  }\n";
            if (inv) {
                os << "  read method Bool invariant() {\n    return this.f0 >= 0";
                for (int f = 1; f < nf; ++f)
                    if (chance(50)) os << " && this.f" << f << " < 1000";
                os << ";\n  }\n";
            }
            for (int f = 0; f < nf; ++f) {
                os << "  mut method Void set" << f << "(Int v) { this.f" << f
                   << " := v; }\n";
                os << "  read method Int get" << f << "() { return this.f" << f
                   << "; }\n";
            }
            os << "}\n";
        }
        n_box = pick(2) + (chance(60) ? 1 : 0);
        if (n_box > 2) n_box = 2;
        box_target.clear();
        for (int b = 0; b < n_box; ++b) {
            int t = pick(n_data);
            box_target.push_back(t);
            os << "class B" << b << " {\n"
               << "  capsule D" << t << " a;\n"
               << "  B" << b << "(capsule D" << t << " a) { this.a = a; }\n"
               << "  read method Bool invariant() { return this.a.f0 >= 0; }\n"
               << "  mut method Void bump(Int v) { this.a.set0(v); }\n"
               << "  read method Int peek() { return this.a.f0; }\n"
               << "}\n";
        }
        return os.str();
    }

    int good_const() { return pick(40); }
    int any_const() { return chance(85) ? good_const() : -(1 + pick(10)); }

    std::string new_data(int d, bool valid_only) {
        std::ostringstream os;
        os << "new D" << d << "(";
        for (int f = 0; f < data_fields[d]; ++f) {
            if (f) os << ", ";
            os << (valid_only || f > 0 ? good_const() : any_const());
        }
        os << ")";
        return os.str();
    }

    std::string emit_main(int budget) {
        std::ostringstream os;
        os << "main {\n";
        std::vector<int> data_vars;  // class index per xN
        std::vector<int> box_vars;   // target data class per yN
        int nx = 0, ny = 0, nz = 0;
        for (int i = 0; i < budget; ++i) {
            switch (pick(8)) {
                case 0: {
                    int d = pick(n_data);
                    os << "  mut D" << d << " x" << nx << " = "
                       << new_data(d, false) << ";\n";
                    data_vars.push_back(d);
                    ++nx;
                    break;
                }
                case 1: {
                    if (data_vars.empty()) break;
                    int v = pick(static_cast<int>(data_vars.size()));
                    int d = data_vars[static_cast<size_t>(v)];
                    os << "  x" << v << ".set" << pick(data_fields[d]) << "("
                       << any_const() << ");\n";
                    break;
                }
                case 2: {
                    if (n_box == 0) break;
                    int b = pick(n_box);
                    os << "  mut B" << b << " y" << ny << " = new B" << b
                       << "(" << new_data(box_target[b], true) << ");\n";
                    box_vars.push_back(b);
                    ++ny;
                    break;
                }
                case 3: {
                    if (box_vars.empty()) break;
                    int v = pick(static_cast<int>(box_vars.size()));
                    os << "  y" << v << ".bump(" << any_const() << ");\n";
                    break;
                }
                case 4: {
                    if (data_vars.empty()) break;
                    int v = pick(static_cast<int>(data_vars.size()));
                    int d = data_vars[static_cast<size_t>(v)];
                    os << "  Int z" << nz++ << " = x" << v << ".get"
                       << pick(data_fields[d]) << "();\n";
                    break;
                }
                case 5: {
                    int d = pick(n_data);
                    // break a fresh object inside a try, recover via SES
                    os << "  try {\n    mut D" << d << " t = "
                       << new_data(d, true) << ";\n    t.set0(-1);\n"
                       << "  } catch {\n  }\n";
                    break;
                }
                case 6: {
                    int d = pick(n_data);
                    os << "  try {\n    mut D" << d << " t = "
                       << new_data(d, true) << ";\n    t.set"
                       << pick(data_fields[d]) << "(" << good_const()
                       << ");\n    throw \"boom\";\n  } catch {\n  }\n";
                    break;
                }
                case 7: {
                    if (box_vars.empty()) break;
                    int v = pick(static_cast<int>(box_vars.size()));
                    os << "  Int z" << nz++ << " = y" << v << ".peek();\n";
                    break;
                }
            }
        }
        os << "  0;\n}\n";
        return os.str();
    }
};

}  // namespace

std::vector<FuzzCase> fuzz_programs(uint64_t seed, int n, int size_budget) {
    std::vector<FuzzCase> out;
    if (n <= 0) return out;
    Gen g(seed);
    int consecutive_rejects = 0;
    while (static_cast<int>(out.size()) < n) {
        std::string src = g.emit_classes() + g.emit_main(size_budget);
        LoadResult lr = load_source(src);
        if (!lr.ok()) {
            if (++consecutive_rejects > 10000)
                throw GenerationExhausted(
                    "fuzz generation acceptance rate collapsed; last source:\n" +
                    src);
            continue;
        }
        consecutive_rejects = 0;
        out.push_back(FuzzCase{std::move(src), std::move(lr.program)});
    }
    return out;
}

}  // namespace ivl
