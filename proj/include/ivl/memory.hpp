#ifndef IVL_MEMORY_HPP
#define IVL_MEMORY_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ivl/ast.hpp"

namespace ivl {

/// Runtime value: location or built-in scalar.
struct Value {
    enum K { Unit, Bool, Int, Str, Loc } k = Unit;
    int64_t i = 0;
    std::shared_ptr<const std::string> s;

    static Value unit() { return {}; }
    static Value boolean(bool b) { return {Bool, b ? 1 : 0, nullptr}; }
    static Value integer(int64_t v) { return {Int, v, nullptr}; }
    static Value str(std::string v) {
        return {Str, 0, std::make_shared<const std::string>(std::move(v))};
    }
    static Value loc(int64_t l) { return {Loc, l, nullptr}; }

    bool operator==(const Value& o) const {
        if (k != o.k) return false;
        if (k == Str) return *s == *o.s;
        return i == o.i;
    }
    bool operator!=(const Value& o) const { return !(*this == o); }
};

ExprPtr value_to_expr(const Value& v);
Value expr_to_value(const Expr& e);  // requires is_value(e)

/// Heap object: class-tagged field tuple. Built-in lists reuse the field
/// vector for their (growable) element storage.
struct Obj {
    std::string cls;
    std::vector<Value> fields;
    bool is_list = false;
    std::shared_ptr<const TypeRef> list_elem;  // element type for lists
};

struct MemSnapshot {
    std::vector<Obj> store;
};

/// σ: finite map from allocation-ordered locations to objects, plus the
/// simulated output log. Location 0 is always the Cap object. `version`
/// bumps on every mutation so analyses can cache per-σ results.
struct Memory {
    std::vector<Obj> store;
    std::vector<std::string> output_log;
    uint64_t version = 0;

    int64_t alloc(Obj o) {
        ++version;
        store.push_back(std::move(o));
        return static_cast<int64_t>(store.size()) - 1;
    }
    Obj& at(int64_t l) { return store[static_cast<size_t>(l)]; }
    const Obj& at(int64_t l) const { return store[static_cast<size_t>(l)]; }
    bool contains(int64_t l) const {
        return l >= 0 && static_cast<size_t>(l) < store.size();
    }
    size_t size() const { return store.size(); }

    std::shared_ptr<const MemSnapshot> snapshot() const {
        auto s = std::make_shared<MemSnapshot>();
        s->store = store;
        return s;
    }
};

/// Raised on internal interpreter invariant violations (never on ordinary
/// program errors, which reduce to error expressions).
struct InterpPanic : std::runtime_error {
    explicit InterpPanic(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace ivl

#endif
