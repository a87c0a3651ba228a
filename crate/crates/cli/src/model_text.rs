//! Line-oriented model format: parsing and compilation into a flat timed
//! game automaton.
//!
//! A document declares clocks, bounded integer variables, base locations
//! with invariants, edges, observable predicates with costs, and the
//! safety predicate. Integer variables are syntactic sugar: the compiler
//! expands them into the location product and drops product locations
//! that are unreachable over the discrete structure.
//!
//! ```text
//! clock x y
//! var pos 0..3 init 0
//! location main
//! init main
//! invariant main when pos=1: x < 2
//! edge main -> main: step u when pos=1 guard 1 <= x < 2 do pos := pos + 1 reset x
//! predicate safe cost 0 loc !(pos=3)
//! predicate xlt1 cost 1 clock x < 1
//! safety safe
//! ```

use std::collections::HashMap;
use std::fmt;

use minobs_core::dbm::{AtomicConstraint, ClockSet, Rel};
use minobs_core::tga::{
    validate, Edge, Location, ModelError, ObservationPredicate, Owner, PredicateCatalog, TgaModel,
};

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug)]
pub enum ModelFileError {
    Parse(ParseError),
    Semantic(String),
    Model(ModelError),
}

impl fmt::Display for ModelFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFileError::Parse(e) => e.fmt(f),
            ModelFileError::Semantic(m) => write!(f, "model error: {m}"),
            ModelFileError::Model(e) => write!(f, "model error: {e}"),
        }
    }
}

impl std::error::Error for ModelFileError {}

impl From<ParseError> for ModelFileError {
    fn from(e: ParseError) -> Self {
        ModelFileError::Parse(e)
    }
}

impl From<ModelError> for ModelFileError {
    fn from(e: ModelError) -> Self {
        ModelFileError::Model(e)
    }
}

/// Boolean expression over integer variables and base locations.
#[derive(Debug, Clone)]
enum VarExpr {
    True,
    False,
    At(String),
    Cmp(String, Rel, i64),
    NotEq(String, i64),
    Not(Box<VarExpr>),
    And(Box<VarExpr>, Box<VarExpr>),
    Or(Box<VarExpr>, Box<VarExpr>),
}

impl VarExpr {
    fn eval(&self, base: &str, vals: &HashMap<String, i64>) -> bool {
        match self {
            VarExpr::True => true,
            VarExpr::False => false,
            VarExpr::At(l) => base == l,
            VarExpr::Cmp(v, rel, k) => {
                let x = vals[v];
                match rel {
                    Rel::Lt => x < *k,
                    Rel::Le => x <= *k,
                    Rel::Eq => x == *k,
                    Rel::Gt => x > *k,
                    Rel::Ge => x >= *k,
                }
            }
            VarExpr::NotEq(v, k) => vals[v] != *k,
            VarExpr::Not(e) => !e.eval(base, vals),
            VarExpr::And(a, b) => a.eval(base, vals) && b.eval(base, vals),
            VarExpr::Or(a, b) => a.eval(base, vals) || b.eval(base, vals),
        }
    }

    fn vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            VarExpr::Cmp(v, _, _) | VarExpr::NotEq(v, _) => out.push(v),
            VarExpr::Not(e) => e.vars(out),
            VarExpr::And(a, b) | VarExpr::Or(a, b) => {
                a.vars(out);
                b.vars(out);
            }
            _ => {}
        }
    }
}

#[derive(Debug, Clone)]
enum Update {
    Set(String, i64),
    Add(String, i64),
}

#[derive(Debug)]
struct RawEdge {
    line: usize,
    source: String,
    target: String,
    action: String,
    controllable: bool,
    when: VarExpr,
    guard: Vec<AtomicConstraint>,
    updates: Vec<Update>,
    resets: Vec<String>,
}

#[derive(Debug)]
struct RawInvariant {
    location: String,
    when: VarExpr,
    atoms: Vec<AtomicConstraint>,
}

#[derive(Debug)]
struct RawPredicate {
    name: String,
    cost_millis: u64,
    loc: VarExpr,
    clock: Vec<AtomicConstraint>,
}

#[derive(Debug, Default)]
struct RawModel {
    name: Option<String>,
    clocks: Vec<String>,
    vars: Vec<(String, i64, i64, i64)>, // name, lo, hi, init
    locations: Vec<String>,
    initial: Option<String>,
    invariants: Vec<RawInvariant>,
    edges: Vec<RawEdge>,
    predicates: Vec<RawPredicate>,
    safety: Option<String>,
}

struct Cursor<'a> {
    line: usize,
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(line: usize, text: &'a str) -> Self {
        Cursor { line, text, pos: 0 }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with([' ', '\t']) {
            self.pos += 1;
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.text.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(tok) {
            // keywords must not glue onto identifiers
            let after = self.pos + tok.len();
            let boundary = tok
                .chars()
                .last()
                .map_or(true, |c| !c.is_alphanumeric() && c != '_')
                || !self.text[after..]
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_alphanumeric() || c == '_');
            if boundary {
                self.pos = after;
                return true;
            }
        }
        false
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{tok}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .map(|c| c.len_utf8())
            .sum::<usize>();
        if len == 0 || rest.chars().next().is_some_and(|c| c.is_ascii_digit()) {
            return Err(self.error("expected an identifier"));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let neg = rest.starts_with('-');
        let digits_at = usize::from(neg);
        let len = rest[digits_at..]
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .count();
        if len == 0 {
            return Err(self.error("expected a number"));
        }
        let val: i64 = rest[..digits_at + len]
            .parse()
            .map_err(|_| self.error("number out of range"))?;
        self.pos += digits_at + len;
        Ok(val)
    }

    /// Cost with up to three decimal places, returned in milli-units.
    fn cost_millis(&mut self) -> Result<u64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.text[self.pos..];
        if rest.starts_with('-') {
            return Err(self.error("cost must be non-negative"));
        }
        let whole: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        if whole.is_empty() {
            return Err(self.error("expected a cost"));
        }
        self.pos += whole.len();
        let mut millis: u64 = whole.parse::<u64>().map_err(|_| self.error("cost too large"))? * 1000;
        if self.text[self.pos..].starts_with('.') {
            self.pos += 1;
            let frac: String = self.text[self.pos..]
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            if frac.is_empty() || frac.len() > 3 {
                self.pos = start;
                return Err(self.error("cost supports at most three decimal places"));
            }
            self.pos += frac.len();
            let scale = 10u64.pow(3 - frac.len() as u32);
            millis += frac.parse::<u64>().unwrap() * scale;
        }
        Ok(millis)
    }

    fn rel(&mut self) -> Result<Rel, ParseError> {
        for (tok, rel) in [
            ("<=", Rel::Le),
            ("<", Rel::Lt),
            (">=", Rel::Ge),
            (">", Rel::Gt),
            ("=", Rel::Eq),
        ] {
            if self.eat(tok) {
                return Ok(rel);
            }
        }
        Err(self.error("expected a comparison operator"))
    }
}

/// `expr := term ('|' term)*`
fn parse_var_expr(c: &mut Cursor) -> Result<VarExpr, ParseError> {
    let mut left = parse_var_term(c)?;
    while c.eat("|") {
        let right = parse_var_term(c)?;
        left = VarExpr::Or(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_var_term(c: &mut Cursor) -> Result<VarExpr, ParseError> {
    let mut left = parse_var_factor(c)?;
    while c.eat("&") {
        let right = parse_var_factor(c)?;
        left = VarExpr::And(Box::new(left), Box::new(right));
    }
    Ok(left)
}

fn parse_var_factor(c: &mut Cursor) -> Result<VarExpr, ParseError> {
    if c.eat("!") {
        return Ok(VarExpr::Not(Box::new(parse_var_factor(c)?)));
    }
    if c.eat("(") {
        let inner = parse_var_expr(c)?;
        c.expect(")")?;
        return Ok(inner);
    }
    if c.eat("true") {
        return Ok(VarExpr::True);
    }
    if c.eat("false") {
        return Ok(VarExpr::False);
    }
    if c.eat("at") {
        return Ok(VarExpr::At(c.ident()?));
    }
    let name = c.ident()?;
    if c.eat("!=") {
        return Ok(VarExpr::NotEq(name, c.integer()?));
    }
    let rel = c.rel()?;
    Ok(VarExpr::Cmp(name, rel, c.integer()?))
}

/// One clock-constraint atom. Lower-bounded forms normalize to bands so
/// `B(X)` membership falls out of the shape.
fn parse_clock_atom(
    c: &mut Cursor,
    clocks: &HashMap<String, usize>,
) -> Result<AtomicConstraint, ParseError> {
    c.skip_ws();
    // `k1 <= x < k2` or `k <= x`
    if c.peek().is_some_and(|ch| ch.is_ascii_digit()) {
        let lo = c.integer()?;
        if lo < 0 {
            return Err(c.error("clock constants are non-negative"));
        }
        c.expect("<=")?;
        let name = c.ident()?;
        let clock = *clocks
            .get(&name)
            .ok_or_else(|| c.error(format!("unknown clock `{name}`")))?;
        if c.eat("<") {
            let hi = c.integer()?;
            if hi <= lo {
                return Err(c.error("band requires k1 < k2"));
            }
            return Ok(AtomicConstraint::band(clock, lo as u32, Some(hi as u32)));
        }
        return Ok(AtomicConstraint::band(clock, lo as u32, None));
    }
    let name = c.ident()?;
    let x = *clocks
        .get(&name)
        .ok_or_else(|| c.error(format!("unknown clock `{name}`")))?;
    if c.eat("-") {
        let other = c.ident()?;
        let y = *clocks
            .get(&other)
            .ok_or_else(|| c.error(format!("unknown clock `{other}`")))?;
        let rel = c.rel()?;
        let k = c.integer()?;
        return Ok(AtomicConstraint::Diff {
            x,
            y,
            rel,
            k: k as i32,
        });
    }
    let rel = c.rel()?;
    let k = c.integer()?;
    if k < 0 {
        return Err(c.error("clock constants are non-negative"));
    }
    Ok(match rel {
        // `x < k` is the band `0 <= x < k`; `x >= k` the band `k <= x`
        Rel::Lt => AtomicConstraint::band(x, 0, Some(k as u32)),
        Rel::Ge => AtomicConstraint::band(x, k as u32, None),
        other => AtomicConstraint::Upper {
            clock: x,
            rel: other,
            k: k as u32,
        },
    })
}

fn parse_clock_constraint(
    c: &mut Cursor,
    clocks: &HashMap<String, usize>,
) -> Result<Vec<AtomicConstraint>, ParseError> {
    if c.eat("true") {
        return Ok(Vec::new());
    }
    let mut atoms = vec![parse_clock_atom(c, clocks)?];
    while c.eat("&") {
        atoms.push(parse_clock_atom(c, clocks)?);
    }
    Ok(atoms)
}

fn parse_raw(text: &str) -> Result<RawModel, ParseError> {
    let mut raw = RawModel::default();
    let mut clock_ids: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut c = Cursor::new(lineno + 1, line);
        if c.eat("name") {
            raw.name = Some(c.ident()?);
        } else if c.eat("clock") {
            while !c.at_end() {
                let name = c.ident()?;
                clock_ids.insert(name.clone(), raw.clocks.len() + 1);
                raw.clocks.push(name);
            }
        } else if c.eat("var") {
            let name = c.ident()?;
            let lo = c.integer()?;
            c.expect("..")?;
            let hi = c.integer()?;
            if hi < lo {
                return Err(c.error("empty variable range"));
            }
            c.expect("init")?;
            let init = c.integer()?;
            if init < lo || init > hi {
                return Err(c.error("initial value outside the range"));
            }
            raw.vars.push((name, lo, hi, init));
        } else if c.eat("locations") || c.eat("location") {
            while !c.at_end() {
                raw.locations.push(c.ident()?);
            }
        } else if c.eat("initial") || c.eat("init") {
            raw.initial = Some(c.ident()?);
        } else if c.eat("invariant") {
            let location = c.ident()?;
            let when = if c.eat("when") {
                parse_var_expr(&mut c)?
            } else {
                VarExpr::True
            };
            c.expect(":")?;
            let atoms = parse_clock_constraint(&mut c, &clock_ids)?;
            raw.invariants.push(RawInvariant {
                location,
                when,
                atoms,
            });
        } else if c.eat("edge") {
            let source = c.ident()?;
            c.expect("->")?;
            let target = c.ident()?;
            c.expect(":")?;
            let action = c.ident()?;
            let controllable = if c.eat("controllable") || c.eat("c") {
                true
            } else if c.eat("uncontrollable") || c.eat("u") {
                false
            } else {
                return Err(c.error("expected `c` or `u` after the action name"));
            };
            let mut when = VarExpr::True;
            let mut guard = Vec::new();
            let mut updates = Vec::new();
            let mut resets = Vec::new();
            loop {
                if c.eat("when") {
                    when = parse_var_expr(&mut c)?;
                } else if c.eat("guard") {
                    guard = parse_clock_constraint(&mut c, &clock_ids)?;
                } else if c.eat("do") {
                    loop {
                        let name = c.ident()?;
                        c.expect(":=")?;
                        // either `v := k` or `v := v + k` / `v := v - k`
                        c.skip_ws();
                        if c.peek().is_some_and(|ch| ch.is_ascii_digit() || ch == '-') {
                            updates.push(Update::Set(name, c.integer()?));
                        } else {
                            let base = c.ident()?;
                            if base != name {
                                return Err(
                                    c.error("updates may only reference the variable itself")
                                );
                            }
                            if c.eat("+") {
                                updates.push(Update::Add(name, c.integer()?));
                            } else if c.eat("-") {
                                updates.push(Update::Add(name, -c.integer()?));
                            } else {
                                return Err(c.error("expected `+` or `-`"));
                            }
                        }
                        if !c.eat(",") {
                            break;
                        }
                    }
                } else if c.eat("reset") {
                    while !c.at_end() {
                        let name = c.ident()?;
                        if !clock_ids.contains_key(&name) {
                            return Err(c.error(format!("unknown clock `{name}`")));
                        }
                        resets.push(name);
                        c.eat(",");
                    }
                } else if c.at_end() {
                    break;
                } else {
                    return Err(c.error("expected `when`, `guard`, `do` or `reset`"));
                }
            }
            raw.edges.push(RawEdge {
                line: lineno + 1,
                source,
                target,
                action,
                controllable,
                when,
                guard,
                updates,
                resets,
            });
        } else if c.eat("predicate") {
            let name = c.ident()?;
            c.expect("cost")?;
            let cost_millis = c.cost_millis()?;
            let mut loc = VarExpr::True;
            let mut clock = Vec::new();
            loop {
                if c.eat("loc") {
                    loc = parse_var_expr(&mut c)?;
                } else if c.eat("clock") {
                    clock = parse_clock_constraint(&mut c, &clock_ids)?;
                } else if c.at_end() {
                    break;
                } else {
                    return Err(c.error("expected `loc` or `clock`"));
                }
            }
            raw.predicates.push(RawPredicate {
                name,
                cost_millis,
                loc,
                clock,
            });
        } else if c.eat("safety") {
            raw.safety = Some(c.ident()?);
        } else {
            return Err(c.error("unknown directive"));
        }
    }
    Ok(raw)
}

/// A parsed and validated model with its predicate catalog.
pub struct ModelFile {
    pub name: String,
    pub model: TgaModel,
    pub catalog: PredicateCatalog,
}

/// Parses the document, expands integer variables into the location
/// product, restricts to discretely reachable product locations, and
/// validates the result.
pub fn parse_model(text: &str) -> Result<ModelFile, ModelFileError> {
    let raw = parse_raw(text)?;
    let sem = |m: String| ModelFileError::Semantic(m);

    if raw.locations.is_empty() {
        return Err(sem("no locations declared".into()));
    }
    let initial_base = raw
        .initial
        .clone()
        .ok_or_else(|| sem("missing `init` directive".into()))?;
    if !raw.locations.contains(&initial_base) {
        return Err(sem(format!("unknown initial location `{initial_base}`")));
    }
    let safety_name = raw
        .safety
        .clone()
        .ok_or_else(|| sem("missing `safety` directive".into()))?;
    if !raw.predicates.iter().any(|p| p.name == safety_name) {
        return Err(sem(format!(
            "safety predicate `{safety_name}` is not declared"
        )));
    }
    for e in &raw.edges {
        for l in [&e.source, &e.target] {
            if !raw.locations.contains(l) {
                return Err(sem(format!("line {}: unknown location `{l}`", e.line)));
            }
        }
    }
    let var_names: Vec<String> = raw.vars.iter().map(|v| v.0.clone()).collect();
    let check_vars = |e: &VarExpr, what: &str| -> Result<(), ModelFileError> {
        let mut used = Vec::new();
        e.vars(&mut used);
        for v in used {
            if !var_names.iter().any(|n| n == v) {
                return Err(sem(format!("{what}: unknown variable `{v}`")));
            }
        }
        Ok(())
    };
    for inv in &raw.invariants {
        check_vars(&inv.when, "invariant")?;
    }
    for e in &raw.edges {
        check_vars(&e.when, "edge condition")?;
    }
    for p in &raw.predicates {
        check_vars(&p.loc, "predicate")?;
    }

    let init_vals: HashMap<String, i64> = raw
        .vars
        .iter()
        .map(|(n, _, _, init)| (n.clone(), *init))
        .collect();

    // product states keyed by (base location, variable valuation)
    let key_of = |base: &str, vals: &HashMap<String, i64>| {
        let mut parts: Vec<String> = raw
            .vars
            .iter()
            .map(|(n, _, _, _)| format!("{n}={}", vals[n]))
            .collect();
        parts.insert(0, base.to_string());
        parts.join(",")
    };

    struct Product {
        base: String,
        vals: HashMap<String, i64>,
    }
    let mut states: Vec<Product> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let push_state = |base: &str, vals: &HashMap<String, i64>,
                          states: &mut Vec<Product>,
                          index: &mut HashMap<String, usize>| {
        let key = key_of(base, vals);
        *index.entry(key).or_insert_with(|| {
            states.push(Product {
                base: base.to_string(),
                vals: vals.clone(),
            });
            states.len() - 1
        })
    };

    let initial = push_state(&initial_base, &init_vals, &mut states, &mut index);
    let mut edges: Vec<Edge> = Vec::new();
    let mut controllable_actions: Vec<String> = Vec::new();
    let mut uncontrollable_actions: Vec<String> = Vec::new();
    for e in &raw.edges {
        let list = if e.controllable {
            &mut controllable_actions
        } else {
            &mut uncontrollable_actions
        };
        if !list.contains(&e.action) {
            list.push(e.action.clone());
        }
    }
    if let Some(a) = controllable_actions
        .iter()
        .find(|a| uncontrollable_actions.contains(a))
    {
        return Err(sem(format!(
            "action `{a}` is declared both controllable and uncontrollable"
        )));
    }

    let clock_ids: HashMap<String, usize> = raw
        .clocks
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i + 1))
        .collect();

    // discrete reachability over the product, instantiating edges on the fly
    let mut frontier = vec![initial];
    while let Some(s) = frontier.pop() {
        let (base, vals) = (states[s].base.clone(), states[s].vals.clone());
        for e in &raw.edges {
            if e.source != base || !e.when.eval(&base, &vals) {
                continue;
            }
            let mut new_vals = vals.clone();
            let mut in_range = true;
            for u in &e.updates {
                let (name, val) = match u {
                    Update::Set(n, k) => (n, *k),
                    Update::Add(n, k) => (n, new_vals[n] + *k),
                };
                let (_, lo, hi, _) = raw
                    .vars
                    .iter()
                    .find(|v| &v.0 == name)
                    .ok_or_else(|| sem(format!("line {}: unknown variable `{name}`", e.line)))?;
                if val < *lo || val > *hi {
                    in_range = false;
                    break;
                }
                new_vals.insert(name.clone(), val);
            }
            if !in_range {
                return Err(sem(format!(
                    "line {}: update drives a variable out of range",
                    e.line
                )));
            }
            let known = states.len();
            let t = push_state(&e.target, &new_vals, &mut states, &mut index);
            if states.len() > known {
                frontier.push(t);
            }
            let owner = if e.controllable {
                Owner::Controllable(
                    controllable_actions
                        .iter()
                        .position(|a| *a == e.action)
                        .unwrap(),
                )
            } else {
                Owner::Uncontrollable(
                    uncontrollable_actions
                        .iter()
                        .position(|a| *a == e.action)
                        .unwrap(),
                )
            };
            edges.push(Edge {
                source: s,
                target: t,
                owner,
                guard: e.guard.clone(),
                resets: e
                    .resets
                    .iter()
                    .map(|r| clock_ids[r])
                    .collect(),
            });
        }
    }

    let locations: Vec<Location> = states
        .iter()
        .map(|p| {
            let mut invariant = Vec::new();
            for inv in &raw.invariants {
                if inv.location == p.base && inv.when.eval(&p.base, &p.vals) {
                    invariant.extend(inv.atoms.iter().cloned());
                }
            }
            Location {
                name: key_of(&p.base, &p.vals),
                invariant,
            }
        })
        .collect();

    let predicates: Vec<ObservationPredicate> = raw
        .predicates
        .iter()
        .map(|p| ObservationPredicate {
            name: p.name.clone(),
            locations: states
                .iter()
                .map(|st| p.loc.eval(&st.base, &st.vals))
                .collect(),
            clock_atoms: p.clock.clone(),
            cost_millis: p.cost_millis,
        })
        .collect();
    let safety = predicates
        .iter()
        .position(|p| p.name == safety_name)
        .unwrap();

    let model = TgaModel {
        clocks: ClockSet::new(raw.clocks.clone()),
        locations,
        initial,
        controllable_actions,
        uncontrollable_actions,
        edges,
    };
    let catalog = PredicateCatalog { predicates, safety };
    validate(&model, &catalog)?;
    Ok(ModelFile {
        name: raw.name.unwrap_or_else(|| "model".to_string()),
        model,
        catalog,
    })
}
