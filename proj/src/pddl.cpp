#include "xplan/pddl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace xplan::pddl {

ParseError::ParseError(std::string msg, int line_, int col_)
    : std::runtime_error(msg + " (line " + std::to_string(line_) + ", col " + std::to_string(col_) + ")"),
      line(line_),
      col(col_) {}

namespace {

// ---------------------------------------------------------------- s-exprs

struct Node {
    bool atom = false;
    std::string text;        // atoms only, lowercased
    std::vector<Node> kids;  // lists only
    int line = 0;
    int col = 0;
};

struct Lexer {
    std::string_view src;
    std::size_t pos = 0;
    int line = 1;
    int col = 1;

    void advance() {
        if (src[pos] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        ++pos;
    }

    void skip_ws() {
        while (pos < src.size()) {
            char c = src[pos];
            if (c == ';') {
                while (pos < src.size() && src[pos] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    bool eof() {
        skip_ws();
        return pos >= src.size();
    }
};

Node parse_node(Lexer& lx) {
    lx.skip_ws();
    if (lx.pos >= lx.src.size()) throw ParseError("unexpected end of input", lx.line, lx.col);
    Node n;
    n.line = lx.line;
    n.col = lx.col;
    char c = lx.src[lx.pos];
    if (c == '(') {
        lx.advance();
        while (true) {
            lx.skip_ws();
            if (lx.pos >= lx.src.size()) throw ParseError("missing ')'", n.line, n.col);
            if (lx.src[lx.pos] == ')') {
                lx.advance();
                return n;
            }
            n.kids.push_back(parse_node(lx));
        }
    }
    if (c == ')') throw ParseError("unexpected ')'", lx.line, lx.col);
    n.atom = true;
    while (lx.pos < lx.src.size()) {
        c = lx.src[lx.pos];
        if (c == '(' || c == ')' || c == ';' || std::isspace(static_cast<unsigned char>(c))) break;
        n.text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        lx.advance();
    }
    return n;
}

Node parse_top(std::string_view text) {
    Lexer lx{text};
    Node root = parse_node(lx);
    if (!lx.eof()) throw ParseError("trailing content after top-level form", lx.line, lx.col);
    if (root.atom) throw ParseError("expected a (define ...) form", root.line, root.col);
    return root;
}

[[noreturn]] void fail(const Node& n, const std::string& msg) { throw ParseError(msg, n.line, n.col); }

const std::string& atom(const Node& n, const char* what) {
    if (!n.atom) fail(n, std::string("expected ") + what);
    return n.text;
}

bool is_section(const Node& n, const char* tag) {
    return !n.atom && !n.kids.empty() && n.kids[0].atom && n.kids[0].text == tag;
}

// Parses "x1 x2 - t y1 - u z" typed lists into (name, type) pairs.
std::vector<std::pair<std::string, std::string>> typed_list(const std::vector<Node>& items,
                                                            std::size_t begin, const Node& ctx) {
    std::vector<std::pair<std::string, std::string>> out;
    std::vector<std::string> pending;
    for (std::size_t i = begin; i < items.size(); ++i) {
        const std::string& s = atom(items[i], "identifier");
        if (s == "-") {
            if (pending.empty()) fail(items[i], "dangling '-' in typed list");
            if (++i >= items.size()) fail(ctx, "missing type after '-'");
            const std::string& t = atom(items[i], "type name");
            for (auto& p : pending) out.emplace_back(p, t);
            pending.clear();
        } else {
            pending.push_back(s);
        }
    }
    for (auto& p : pending) out.emplace_back(p, "object");
    return out;
}

const std::set<std::string> kSupportedRequirements = {":strips", ":typing", ":action-costs"};

SchemaLiteral schema_literal(const Node& n, const DomainModel& dom,
                             const std::unordered_map<std::string, int>& params) {
    if (n.atom || n.kids.empty() || !n.kids[0].atom) fail(n, "expected (predicate args...)");
    SchemaLiteral lit;
    auto it = dom.predicate_index.find(n.kids[0].text);
    if (it == dom.predicate_index.end()) fail(n, "undeclared predicate '" + n.kids[0].text + "'");
    lit.predicate = it->second;
    for (std::size_t i = 1; i < n.kids.size(); ++i) {
        const std::string& v = atom(n.kids[i], "parameter");
        auto p = params.find(v);
        if (p == params.end()) fail(n.kids[i], "unknown parameter '" + v + "'");
        lit.args.push_back(p->second);
    }
    if (static_cast<int>(lit.args.size()) != dom.predicates[lit.predicate].arity())
        fail(n, "arity mismatch for predicate '" + n.kids[0].text + "'");
    return lit;
}

// Flattens (and x y z) / single literal / (and) into a node list.
std::vector<const Node*> conjunction(const Node& n) {
    std::vector<const Node*> out;
    if (!n.atom && !n.kids.empty() && n.kids[0].atom && n.kids[0].text == "and") {
        for (std::size_t i = 1; i < n.kids.size(); ++i) out.push_back(&n.kids[i]);
    } else if (!n.atom && n.kids.empty()) {
        // "()" — empty conjunction
    } else {
        out.push_back(&n);
    }
    return out;
}

int parse_cost_constant(const Node& n) {
    const std::string& s = atom(n, "cost constant");
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) fail(n, "cost must be a nonnegative integer constant");
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        fail(n, "cost constant out of range");
    }
}

void parse_action(const Node& n, DomainModel& dom) {
    if (n.kids.size() < 2 || !n.kids[1].atom) fail(n, "expected (:action name ...)");
    ActionSchema schema;
    schema.name = n.kids[1].text;
    std::unordered_map<std::string, int> params;
    std::size_t i = 2;
    while (i < n.kids.size()) {
        const std::string& key = atom(n.kids[i], "keyword");
        if (i + 1 >= n.kids.size()) fail(n.kids[i], "missing value after " + key);
        const Node& val = n.kids[i + 1];
        if (key == ":parameters") {
            if (val.atom) fail(val, "expected parameter list");
            for (auto& [pname, ptype] : typed_list(val.kids, 0, val)) {
                if (pname.empty() || pname[0] != '?') fail(val, "parameter names must start with '?'");
                params[pname] = static_cast<int>(schema.param_names.size());
                schema.param_names.push_back(pname);
                schema.param_types.push_back(ptype);
            }
        } else if (key == ":precondition") {
            for (const Node* lit : conjunction(val)) {
                if (is_section(*lit, "not")) fail(*lit, "negative preconditions are not supported");
                schema.precondition.push_back(schema_literal(*lit, dom, params));
            }
        } else if (key == ":effect") {
            for (const Node* eff : conjunction(val)) {
                if (is_section(*eff, "not")) {
                    if (eff->kids.size() != 2) fail(*eff, "expected (not (predicate args...))");
                    schema.del.push_back(schema_literal(eff->kids[1], dom, params));
                } else if (is_section(*eff, "increase")) {
                    if (eff->kids.size() != 3 || !is_section(eff->kids[1], "total-cost"))
                        fail(*eff, "only (increase (total-cost) k) is supported");
                    schema.cost = parse_cost_constant(eff->kids[2]);
                } else {
                    schema.add.push_back(schema_literal(*eff, dom, params));
                }
            }
        } else {
            fail(n.kids[i], "unsupported action field " + key);
        }
        i += 2;
    }
    dom.schemas.push_back(std::move(schema));
}

std::string atom_key(const std::string& pred, std::span<const std::string> args) {
    std::string key = pred;
    for (const auto& a : args) {
        key.push_back(' ');
        key += a;
    }
    return key;
}

}  // namespace

bool DomainModel::is_subtype(const std::string& t, const std::string& ancestor) const {
    if (ancestor == "object" || t == ancestor) return true;
    std::string cur = t;
    while (true) {
        auto it = supertype.find(cur);
        if (it == supertype.end()) return false;
        cur = it->second;
        if (cur == ancestor) return true;
    }
}

DomainModel parse_domain(std::string_view text) {
    Node root = parse_top(text);
    if (!is_section(root, "define") || root.kids.size() < 2 || !is_section(root.kids[1], "domain") ||
        root.kids[1].kids.size() != 2)
        fail(root, "expected (define (domain name) ...)");
    DomainModel dom;
    dom.name = atom(root.kids[1].kids[1], "domain name");

    for (std::size_t i = 2; i < root.kids.size(); ++i) {
        const Node& sec = root.kids[i];
        if (is_section(sec, ":requirements")) {
            for (std::size_t j = 1; j < sec.kids.size(); ++j) {
                const std::string& req = atom(sec.kids[j], "requirement flag");
                if (!kSupportedRequirements.count(req)) fail(sec.kids[j], "unsupported requirement " + req);
                if (req == ":typing") dom.typed = true;
            }
        } else if (is_section(sec, ":types")) {
            dom.typed = true;
            for (auto& [t, parent] : typed_list(sec.kids, 1, sec)) {
                dom.types.push_back(t);
                if (parent != "object") dom.supertype[t] = parent;
            }
        } else if (is_section(sec, ":predicates")) {
            for (std::size_t j = 1; j < sec.kids.size(); ++j) {
                const Node& p = sec.kids[j];
                if (p.atom || p.kids.empty()) fail(p, "expected (name ?params...)");
                Predicate pred;
                pred.name = atom(p.kids[0], "predicate name");
                if (dom.predicate_index.count(pred.name)) fail(p, "duplicate predicate '" + pred.name + "'");
                for (auto& [pname, ptype] : typed_list(p.kids, 1, p)) {
                    (void)pname;
                    pred.param_types.push_back(ptype);
                }
                dom.predicate_index[pred.name] = static_cast<int>(dom.predicates.size());
                dom.predicates.push_back(std::move(pred));
            }
        } else if (is_section(sec, ":functions")) {
            for (std::size_t j = 1; j < sec.kids.size(); ++j)
                if (!is_section(sec.kids[j], "total-cost")) fail(sec.kids[j], "only (total-cost) is supported");
        } else if (is_section(sec, ":action")) {
            parse_action(sec, dom);
        } else {
            fail(sec, "unsupported domain section");
        }
    }
    return dom;
}

ProblemInstance parse_problem(std::string_view text) {
    Node root = parse_top(text);
    if (!is_section(root, "define") || root.kids.size() < 2 || !is_section(root.kids[1], "problem") ||
        root.kids[1].kids.size() != 2)
        fail(root, "expected (define (problem name) ...)");
    ProblemInstance prob;
    prob.name = atom(root.kids[1].kids[1], "problem name");

    auto ground_atom = [](const Node& n) {
        if (n.atom || n.kids.empty() || !n.kids[0].atom) fail(n, "expected (predicate objects...)");
        GroundAtom a;
        a.predicate = n.kids[0].text;
        for (std::size_t i = 1; i < n.kids.size(); ++i) a.args.push_back(atom(n.kids[i], "object name"));
        return a;
    };

    for (std::size_t i = 2; i < root.kids.size(); ++i) {
        const Node& sec = root.kids[i];
        if (is_section(sec, ":domain")) {
            if (sec.kids.size() != 2) fail(sec, "expected (:domain name)");
            prob.domain_name = atom(sec.kids[1], "domain name");
        } else if (is_section(sec, ":objects")) {
            prob.objects = typed_list(sec.kids, 1, sec);
        } else if (is_section(sec, ":init")) {
            for (std::size_t j = 1; j < sec.kids.size(); ++j) {
                if (is_section(sec.kids[j], "=")) continue;  // (= (total-cost) 0)
                prob.init.push_back(ground_atom(sec.kids[j]));
            }
        } else if (is_section(sec, ":goal")) {
            if (sec.kids.size() != 2) fail(sec, "expected (:goal formula)");
            for (const Node* lit : conjunction(sec.kids[1])) prob.goal.push_back(ground_atom(*lit));
        } else if (is_section(sec, ":metric")) {
            // minimize (total-cost) — accepted and ignored
        } else {
            fail(sec, "unsupported problem section");
        }
    }
    return prob;
}

// ---------------------------------------------------------------- grounding

GroundTask ground(const DomainModel& domain, const ProblemInstance& problem) {
    // Validate objects and index them by type-compatible membership.
    std::unordered_map<std::string, int> object_index;
    for (const auto& [oname, otype] : problem.objects) {
        if (object_index.count(oname)) throw std::runtime_error("duplicate object '" + oname + "'");
        if (otype != "object" &&
            std::find(domain.types.begin(), domain.types.end(), otype) == domain.types.end())
            throw std::runtime_error("type mismatch: unknown type '" + otype + "' for object '" + oname + "'");
        object_index[oname] = static_cast<int>(object_index.size());
    }

    auto check_atom = [&](const GroundAtom& a, const char* where) {
        auto it = domain.predicate_index.find(a.predicate);
        if (it == domain.predicate_index.end())
            throw std::runtime_error(std::string(where) + ": undeclared predicate '" + a.predicate + "'");
        const Predicate& pred = domain.predicates[it->second];
        if (static_cast<int>(a.args.size()) != pred.arity())
            throw std::runtime_error(std::string(where) + ": arity mismatch for '" + a.predicate + "'");
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            auto oit = object_index.find(a.args[i]);
            if (oit == object_index.end())
                throw std::runtime_error(std::string(where) + ": unknown object '" + a.args[i] + "'");
            const std::string& otype = problem.objects[oit->second].second;
            if (!domain.is_subtype(otype, pred.param_types[i]))
                throw std::runtime_error(std::string(where) + ": type mismatch in '" + a.predicate + "' argument '" +
                                         a.args[i] + "'");
        }
    };
    for (const auto& a : problem.init) check_atom(a, "init");
    for (const auto& a : problem.goal) check_atom(a, "goal");

    // Static predicates: never added or deleted by any schema.
    std::vector<bool> is_static(domain.predicates.size(), true);
    for (const auto& schema : domain.schemas) {
        for (const auto& lit : schema.add) is_static[lit.predicate] = false;
        for (const auto& lit : schema.del) is_static[lit.predicate] = false;
    }

    std::set<std::string> init_keys;
    for (const auto& a : problem.init) init_keys.insert(atom_key(a.predicate, a.args));

    // Enumerate typed instantiations per schema, pruning on static preconditions.
    struct StagedAction {
        std::string name;
        std::string schema;
        std::vector<std::string> pre, add, del;
        int cost = 1;
    };
    std::vector<StagedAction> staged;

    for (const auto& schema : domain.schemas) {
        std::vector<std::vector<int>> candidates(schema.param_names.size());
        bool instantiable = true;
        for (std::size_t p = 0; p < schema.param_types.size(); ++p) {
            for (std::size_t o = 0; o < problem.objects.size(); ++o)
                if (domain.is_subtype(problem.objects[o].second, schema.param_types[p]))
                    candidates[p].push_back(static_cast<int>(o));
            if (candidates[p].empty()) instantiable = false;
        }
        if (!instantiable) continue;

        std::vector<std::size_t> odo(schema.param_names.size(), 0);
        while (true) {
            std::vector<std::string> binding(schema.param_names.size());
            for (std::size_t p = 0; p < odo.size(); ++p)
                binding[p] = problem.objects[candidates[p][odo[p]]].first;

            auto instantiate = [&](const SchemaLiteral& lit) {
                std::vector<std::string> args(lit.args.size());
                for (std::size_t i = 0; i < lit.args.size(); ++i) args[i] = binding[lit.args[i]];
                return atom_key(domain.predicates[lit.predicate].name, args);
            };

            bool keep = true;
            StagedAction act;
            for (const auto& lit : schema.precondition) {
                std::string key = instantiate(lit);
                if (is_static[lit.predicate] && !init_keys.count(key)) {
                    keep = false;
                    break;
                }
                act.pre.push_back(std::move(key));
            }
            if (keep) {
                act.schema = schema.name;
                act.name = schema.name;
                for (const auto& b : binding) {
                    act.name.push_back(' ');
                    act.name += b;
                }
                act.cost = schema.cost;
                for (const auto& lit : schema.add) act.add.push_back(instantiate(lit));
                for (const auto& lit : schema.del) act.del.push_back(instantiate(lit));
                // Add wins over delete when an instantiation collapses them onto one fluent.
                std::set<std::string> adds(act.add.begin(), act.add.end());
                std::erase_if(act.del, [&](const std::string& k) { return adds.count(k) > 0; });
                staged.push_back(std::move(act));
            }

            std::size_t p = odo.size();
            while (p > 0) {
                --p;
                if (++odo[p] < candidates[p].size()) break;
                odo[p] = 0;
                if (p == 0) goto schema_done;
            }
            if (odo.empty()) break;  // zero-parameter schema instantiates exactly once
        }
    schema_done:;
    }

    // Intern the fluent universe: init + every literal of kept actions, lexicographic ids.
    // Goals resolve against this universe; an absent goal fluent is an error below.
    std::set<std::string> universe(init_keys.begin(), init_keys.end());
    for (const auto& a : staged) {
        universe.insert(a.pre.begin(), a.pre.end());
        universe.insert(a.add.begin(), a.add.end());
        universe.insert(a.del.begin(), a.del.end());
    }

    GroundTask task;
    task.fluents.assign(universe.begin(), universe.end());
    for (std::size_t i = 0; i < task.fluents.size(); ++i)
        task.fluent_index[task.fluents[i]] = static_cast<int>(i);

    auto resolve = [&](const std::vector<std::string>& keys) {
        std::vector<int> ids;
        ids.reserve(keys.size());
        for (const auto& k : keys) ids.push_back(task.fluent_index.at(k));
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        return ids;
    };

    task.actions.reserve(staged.size());
    for (const auto& a : staged) {
        GroundAction ga;
        ga.id = static_cast<int>(task.actions.size());
        ga.name = a.name;
        ga.schema = a.schema;
        ga.pre = resolve(a.pre);
        ga.add = resolve(a.add);
        ga.del = resolve(a.del);
        ga.cost = a.cost;
        task.actions.push_back(std::move(ga));
    }

    task.initial = State(task.fluents.size());
    for (const auto& k : init_keys) task.initial.set(task.fluent_index.at(k));

    for (const auto& g : problem.goal) {
        std::string key = atom_key(g.predicate, g.args);
        auto it = task.fluent_index.find(key);
        if (it == task.fluent_index.end())
            throw std::runtime_error("goal fluent '" + key + "' outside the grounded fluent universe");
        task.goal.push_back(it->second);
    }
    std::sort(task.goal.begin(), task.goal.end());
    task.goal.erase(std::unique(task.goal.begin(), task.goal.end()), task.goal.end());
    return task;
}

// ---------------------------------------------------------------- semantics

bool applicable(const GroundTask& task, const State& s, int action_id) {
    return s.contains_all(task.actions[static_cast<std::size_t>(action_id)].pre);
}

State apply(const GroundTask& task, const State& s, int action_id) {
    const GroundAction& a = task.actions[static_cast<std::size_t>(action_id)];
    if (!s.contains_all(a.pre)) throw std::runtime_error("inapplicable action '" + a.name + "'");
    State out = s;
    for (int f : a.del) out.reset(f);
    for (int f : a.add) out.set(f);
    return out;
}

bool goal_satisfied(const GroundTask& task, const State& s) { return s.contains_all(task.goal); }

ValidationReport validate_plan(const GroundTask& task, const Plan& plan) {
    ValidationReport report;
    State s = task.initial;
    for (std::size_t i = 0; i < plan.actions.size(); ++i) {
        const GroundAction& a = task.actions[static_cast<std::size_t>(plan.actions[i])];
        report.total_cost += a.cost;
        if (report.first_failing_index >= 0) continue;
        if (!s.contains_all(a.pre)) {
            report.first_failing_index = static_cast<int>(i);
            continue;
        }
        for (int f : a.del) s.reset(f);
        for (int f : a.add) s.set(f);
    }
    report.goal_satisfied = report.first_failing_index < 0 && goal_satisfied(task, s);
    report.valid = report.first_failing_index < 0 && report.goal_satisfied;
    return report;
}

// ---------------------------------------------------------------- plan text

std::string to_plan_text(const GroundTask& task, const Plan& plan) {
    std::string out;
    for (int id : plan.actions) {
        out.push_back('(');
        out += task.actions[static_cast<std::size_t>(id)].name;
        out += ")\n";
    }
    return out;
}

Plan parse_plan_text(const GroundTask& task, std::string_view text) {
    std::unordered_map<std::string, int> by_name;
    for (const auto& a : task.actions) by_name[a.name] = a.id;

    Plan plan;
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body;
        for (char c : line) {
            if (c == ';') break;
            body.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
        auto first = body.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        auto last = body.find_last_not_of(" \t\r");
        body = body.substr(first, last - first + 1);
        if (body.front() != '(' || body.back() != ')')
            throw ParseError("expected (name args...)", lineno, 1);
        std::string name = body.substr(1, body.size() - 2);
        // collapse inner whitespace runs
        std::istringstream ws{name};
        std::string tok, canon;
        while (ws >> tok) {
            if (!canon.empty()) canon.push_back(' ');
            canon += tok;
        }
        auto it = by_name.find(canon);
        if (it == by_name.end()) throw ParseError("unknown ground action '" + canon + "'", lineno, 1);
        plan.actions.push_back(it->second);
    }
    return plan;
}

}  // namespace xplan::pddl
