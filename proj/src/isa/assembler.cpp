#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "faultforge/isa.hpp"

namespace faultforge {

AsmError::AsmError(int line, const std::string &reason)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + reason : reason),
      line_(line), reason_(reason) {}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.remove_suffix(1);
    return s;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto &c : out)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool valid_ident(std::string_view s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    });
}

class LineParser {
  public:
    LineParser(int line) : line_(line) {}

    [[noreturn]] void fail(const std::string &why) const { throw AsmError(line_, why); }

    Reg reg(std::string_view tok) const {
        std::string t = lower(trim(tok));
        if (t == "pc")
            return kPcReg;
        if (t.size() < 2 || t[0] != 'r')
            fail("expected register, got '" + t + "'");
        unsigned v = 0;
        auto [p, ec] = std::from_chars(t.data() + 1, t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size() || v >= kNumRegs)
            fail("bad register '" + t + "'");
        return static_cast<Reg>(v);
    }

    static bool is_imm(std::string_view tok) {
        tok = trim(tok);
        return !tok.empty() && tok[0] == '#';
    }

    std::int64_t number(std::string_view t) const {
        t = trim(t);
        bool neg = false;
        if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
            neg = t[0] == '-';
            t.remove_prefix(1);
        }
        int base = 10;
        if (t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X')) {
            base = 16;
            t.remove_prefix(2);
        }
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v, base);
        if (t.empty() || ec != std::errc() || p != t.data() + t.size())
            fail("bad number '" + std::string(t) + "'");
        if (v > 0xffffffffull)
            fail("number out of 32-bit range");
        return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
    }

    std::int32_t imm(std::string_view tok) const {
        tok = trim(tok);
        if (!is_imm(tok))
            fail("expected immediate, got '" + std::string(tok) + "'");
        std::int64_t v = number(tok.substr(1));
        if (v < INT32_MIN)
            fail("immediate out of range");
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
    }

    Word word(std::string_view tok) const {
        std::int64_t v = number(tok);
        if (v < INT32_MIN)
            fail("value out of range");
        return static_cast<Word>(v);
    }

  private:
    int line_;
};

// Splits on commas outside brackets.
std::vector<std::string_view> split_operands(std::string_view s) {
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '[')
            ++depth;
        else if (s[i] == ']')
            --depth;
        else if (s[i] == ',' && depth == 0) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    auto last = trim(s.substr(start));
    if (!last.empty() || !out.empty())
        out.push_back(last);
    return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i])))
            ++i;
        std::size_t j = i;
        while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j])))
            ++j;
        if (j > i)
            out.push_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

void parse_mem(const LineParser &lp, std::string_view tok, Reg &base, std::optional<std::int32_t> &off) {
    tok = trim(tok);
    if (tok.size() < 2 || tok.front() != '[' || tok.back() != ']')
        lp.fail("expected memory operand [rn, #imm]");
    auto inner = split_operands(tok.substr(1, tok.size() - 2));
    base = kNoReg;
    off = 0;
    if (inner.size() == 1) {
        if (LineParser::is_imm(inner[0]))
            off = lp.imm(inner[0]);
        else
            base = lp.reg(inner[0]);
    } else if (inner.size() == 2) {
        base = lp.reg(inner[0]);
        off = lp.imm(inner[1]);
    } else {
        lp.fail("bad memory operand");
    }
}

Instruction parse_instruction(const LineParser &lp, std::string_view text) {
    std::size_t sp = 0;
    while (sp < text.size() && !std::isspace(static_cast<unsigned char>(text[sp])))
        ++sp;
    std::string mn = lower(text.substr(0, sp));
    auto ops = split_operands(trim(text.substr(sp)));
    auto want = [&](std::size_t n) {
        if (ops.size() != n)
            lp.fail("'" + mn + "' expects " + std::to_string(n) + " operand(s), got " +
                    std::to_string(ops.size()));
    };

    Instruction in;
    if (mn == "nop" || mn == "halt") {
        want(0);
        in.op = mn == "nop" ? Opcode::Nop : Opcode::Halt;
        return in;
    }
    if (mn == "mov" || mn == "movi") {
        want(2);
        in.dest = lp.reg(ops[0]);
        if (LineParser::is_imm(ops[1])) {
            in.op = Opcode::Movi;
            in.imm = lp.imm(ops[1]);
        } else {
            if (mn == "movi")
                lp.fail("movi expects an immediate");
            in.op = Opcode::Mov;
            in.src1 = lp.reg(ops[1]);
        }
        return in;
    }
    if (mn == "add" || mn == "sub" || mn == "addi" || mn == "subi") {
        want(3);
        in.dest = lp.reg(ops[0]);
        in.src1 = lp.reg(ops[1]);
        bool sub = mn[0] == 's';
        if (LineParser::is_imm(ops[2])) {
            in.op = sub ? Opcode::Subi : Opcode::Addi;
            in.imm = lp.imm(ops[2]);
        } else {
            if (mn.size() == 4)
                lp.fail(mn + " expects an immediate");
            in.op = sub ? Opcode::Sub : Opcode::Add;
            in.src2 = lp.reg(ops[2]);
        }
        return in;
    }
    if (auto op = opcode_from_name(mn); op && is_logic(*op)) {
        want(3);
        in.op = *op;
        in.dest = lp.reg(ops[0]);
        in.src1 = lp.reg(ops[1]);
        if (LineParser::is_imm(ops[2]))
            in.imm = lp.imm(ops[2]);
        else
            in.src2 = lp.reg(ops[2]);
        return in;
    }
    if (mn == "cmp" || mn == "cmpi") {
        want(2);
        in.src1 = lp.reg(ops[0]);
        if (LineParser::is_imm(ops[1])) {
            in.op = Opcode::Cmpi;
            in.imm = lp.imm(ops[1]);
        } else {
            if (mn == "cmpi")
                lp.fail("cmpi expects an immediate");
            in.op = Opcode::Cmp;
            in.src2 = lp.reg(ops[1]);
        }
        return in;
    }
    if (mn == "ldr") {
        want(2);
        in.op = Opcode::Ldr;
        in.dest = lp.reg(ops[0]);
        parse_mem(lp, ops[1], in.src1, in.imm);
        return in;
    }
    if (mn == "str") {
        want(2);
        in.op = Opcode::Str;
        in.src1 = lp.reg(ops[0]);
        parse_mem(lp, ops[1], in.src2, in.imm);
        return in;
    }
    if (auto op = opcode_from_name(mn); op && is_branch(*op)) {
        want(1);
        in.op = *op;
        if (!valid_ident(ops[0]))
            lp.fail("bad branch label '" + std::string(ops[0]) + "'");
        in.label = std::string(ops[0]);
        return in;
    }
    lp.fail("unknown mnemonic '" + mn + "'");
}

std::string strip_comment(std::string_view line) {
    std::size_t cut = line.size();
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == ';' || line[i] == '@' || (line[i] == '/' && i + 1 < line.size() && line[i + 1] == '/')) {
            cut = i;
            break;
        }
    }
    return std::string(line.substr(0, cut));
}

}  // namespace

void ProgramBuilder::label(const std::string &name, int line) {
    if (!valid_ident(name))
        throw AsmError(line, "bad label name '" + name + "'");
    if (!labels_.emplace(name, static_cast<std::uint32_t>(code_.size())).second)
        throw AsmError(line, "duplicate label '" + name + "'");
}

void ProgramBuilder::emit(Instruction ins, int line) {
    if (ins.dest == kPcReg)
        throw AsmError(line, "r15 is the program counter and cannot be written");
    code_.push_back(std::move(ins));
    lines_.push_back(line);
}

void ProgramBuilder::region(Region r, int line) {
    if (r.length == 0)
        throw AsmError(line, "region '" + r.name + "' has zero length");
    if (r.init.size() > r.length)
        throw AsmError(line, "region '" + r.name + "' has more initial words than its length");
    if (static_cast<std::uint64_t>(r.base) + r.length > 0x100000000ull)
        throw AsmError(line, "region '" + r.name + "' exceeds the address space");
    for (const auto &o : regions_) {
        if (o.name == r.name)
            throw AsmError(line, "duplicate region '" + r.name + "'");
        bool disjoint = static_cast<std::uint64_t>(r.base) + r.length <= o.base ||
                        static_cast<std::uint64_t>(o.base) + o.length <= r.base;
        if (!disjoint)
            throw AsmError(line, "region '" + r.name + "' overlaps region '" + o.name + "'");
    }
    r.init.resize(r.length, 0);
    regions_.push_back(std::move(r));
}

Program ProgramBuilder::build() const {
    Program p;
    p.code = code_;
    p.labels = labels_;
    p.regions = regions_;
    p.init_regs = init_;
    p.init_regs[kPcReg] = 0;
    for (std::size_t i = 0; i < p.code.size(); ++i) {
        auto &in = p.code[i];
        if (!is_branch(in.op))
            continue;
        auto it = p.labels.find(in.label);
        if (it == p.labels.end())
            throw AsmError(lines_[i], "undefined label '" + in.label + "'");
        if (it->second >= p.code.size())
            throw AsmError(lines_[i], "label '" + in.label + "' points past the end of the program");
        in.target = it->second;
    }
    p.blocks = build_cfg(p);
    p.block_of.assign(p.code.size(), 0);
    for (const auto &b : p.blocks)
        for (std::uint32_t i = b.entry; i <= b.exit; ++i)
            p.block_of[i] = b.id;
    return p;
}

Program assemble(std::string_view text) {
    ProgramBuilder b;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        LineParser lp(lineno);
        std::string stripped = strip_comment(raw);
        std::string_view line = trim(stripped);
        if (line.empty())
            continue;
        if (line[0] == '.') {
            auto toks = split_ws(line);
            std::string dir = lower(toks[0]);
            if (dir == ".region") {
                if (toks.size() < 4)
                    lp.fail(".region expects: name base length [init...]");
                Region r;
                r.name = std::string(toks[1]);
                if (!valid_ident(r.name))
                    lp.fail("bad region name '" + r.name + "'");
                r.base = lp.word(toks[2]);
                r.length = lp.word(toks[3]);
                for (std::size_t i = 4; i < toks.size(); ++i)
                    r.init.push_back(lp.word(toks[i]));
                b.region(std::move(r), lineno);
            } else if (dir == ".init") {
                if (toks.size() != 3)
                    lp.fail(".init expects: register value");
                Reg r = lp.reg(toks[1]);
                if (r == kPcReg)
                    lp.fail("the program counter cannot be initialized");
                b.init(r, lp.word(toks[2]));
            } else {
                lp.fail("unknown directive '" + dir + "'");
            }
            continue;
        }
        // Leading labels, possibly followed by an instruction on the same line.
        while (true) {
            auto colon = line.find(':');
            if (colon == std::string_view::npos)
                break;
            auto name = trim(line.substr(0, colon));
            if (!valid_ident(name))
                break;
            b.label(std::string(name), lineno);
            line = trim(line.substr(colon + 1));
        }
        if (line.empty())
            continue;
        b.emit(parse_instruction(lp, line), lineno);
    }
    return b.build();
}

std::vector<BasicBlock> build_cfg(const Program &p) {
    const auto n = static_cast<std::uint32_t>(p.code.size());
    std::vector<BasicBlock> blocks;
    if (n == 0)
        return blocks;
    std::set<std::uint32_t> leaders{0};
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto &in = p.code[i];
        if (!is_branch(in.op))
            continue;
        leaders.insert(in.target);
        if (i + 1 < n)
            leaders.insert(i + 1);
    }
    std::vector<std::uint32_t> starts(leaders.begin(), leaders.end());
    std::vector<std::uint32_t> id_of(n, 0);
    for (std::uint32_t b = 0; b < starts.size(); ++b) {
        BasicBlock bb;
        bb.id = b;
        bb.entry = starts[b];
        bb.exit = (b + 1 < starts.size() ? starts[b + 1] : n) - 1;
        blocks.push_back(bb);
        for (auto i = bb.entry; i <= bb.exit; ++i)
            id_of[i] = b;
    }
    for (auto &bb : blocks) {
        const auto &last = p.code[bb.exit];
        std::set<std::uint32_t> succ;
        if (last.op == Opcode::Halt) {
        } else if (last.op == Opcode::B) {
            succ.insert(id_of[last.target]);
        } else {
            if (is_cond_branch(last.op))
                succ.insert(id_of[last.target]);
            if (bb.exit + 1 < n)
                succ.insert(id_of[bb.exit + 1]);
        }
        bb.successors.assign(succ.begin(), succ.end());
    }
    return blocks;
}

std::string disassemble(const Program &p) {
    std::ostringstream os;
    for (unsigned r = 0; r < kPcReg; ++r)
        if (p.init_regs[r] != 0)
            os << ".init r" << r << " 0x" << std::hex << p.init_regs[r] << std::dec << "\n";
    for (const auto &r : p.regions) {
        os << ".region " << r.name << " 0x" << std::hex << r.base << std::dec << " " << r.length;
        // Trailing zero words are implied.
        std::size_t keep = r.init.size();
        while (keep > 0 && r.init[keep - 1] == 0)
            --keep;
        for (std::size_t i = 0; i < keep; ++i)
            os << " 0x" << std::hex << r.init[i] << std::dec;
        os << "\n";
    }
    std::multimap<std::uint32_t, std::string> by_index;
    for (const auto &[name, idx] : p.labels)
        by_index.emplace(idx, name);
    for (std::uint32_t i = 0; i <= p.code.size(); ++i) {
        auto [lo, hi] = by_index.equal_range(i);
        for (auto it = lo; it != hi; ++it)
            os << it->second << ":\n";
        if (i < p.code.size())
            os << "    " << format_instruction(p.code[i]) << "\n";
    }
    return os.str();
}

}  // namespace faultforge
