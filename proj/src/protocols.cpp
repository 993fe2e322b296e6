#include "ivl/protocols.hpp"

#include <stdexcept>

namespace ivl {

const char* protocol_name(ProtocolKind k) {
    switch (k) {
        case ProtocolKind::Paper: return "paper";
        case ProtocolKind::DVisibleState: return "d";
        case ProtocolKind::EiffelVisibleState: return "eiffel";
    }
    return "?";
}

ProtocolKind protocol_from_name(const std::string& s) {
    if (s == "paper") return ProtocolKind::Paper;
    if (s == "d" || s == "d_visible_state") return ProtocolKind::DVisibleState;
    if (s == "eiffel" || s == "eiffel_visible_state")
        return ProtocolKind::EiffelVisibleState;
    throw std::invalid_argument("unknown protocol mode: " + s);
}

const char* check_site_name(CheckSite s) {
    switch (s) {
        case CheckSite::Ctor: return "ctor";
        case CheckSite::FieldUpdate: return "field_update";
        case CheckSite::CapsuleMutatorExit: return "capsule_mutator_exit";
        case CheckSite::MethodEntry: return "method_entry";
        case CheckSite::MethodExit: return "method_exit";
    }
    return "?";
}

bool classify_field_backed(const Program& p, const std::string& cls,
                           const std::string& method) {
    const ClassDecl* cd = p.find_class(cls);
    if (!cd || !cd->uniform_access) return false;
    const MethodDecl* md = cd->find_method(method);
    if (!md || !md->body) return false;
    const Expr& b = *md->body;
    return b.kind == Ek::FieldAcc && b.kids[0]->kind == Ek::Var &&
           b.kids[0]->name == "this";
}

bool check_events(const Program& p, const ProtocolMode& mode,
                  const CheckEvent& ev) {
    const ClassDecl* cd = p.find_class(ev.cls);
    if (!cd || !cd->has_declared_invariant()) return false;
    if (ev.kind == CheckEvent::McallEntry || ev.kind == CheckEvent::McallExit) {
        if (ev.method == "invariant") return false;
    }
    switch (mode.kind) {
        case ProtocolKind::Paper:
            return ev.kind == CheckEvent::CtorExit ||
                   ev.kind == CheckEvent::FieldUpdate ||
                   ev.kind == CheckEvent::CapsuleMutatorExit;
        case ProtocolKind::DVisibleState:
            return ev.kind == CheckEvent::CtorExit ||
                   ev.kind == CheckEvent::McallEntry ||
                   ev.kind == CheckEvent::McallExit;
        case ProtocolKind::EiffelVisibleState:
            if (ev.kind == CheckEvent::CtorExit) return true;
            if (ev.kind != CheckEvent::McallEntry &&
                ev.kind != CheckEvent::McallExit)
                return false;
            if (!ev.qualified) return false;
            if (classify_field_backed(p, ev.cls, ev.method)) return false;
            return true;
    }
    return false;
}

}  // namespace ivl
