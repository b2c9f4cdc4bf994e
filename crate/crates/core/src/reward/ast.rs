use std::fmt;

use super::features::Feature;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div => 3,
        }
    }

    pub const ALL: [BinOp; 10] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Abs,
    Min,
    Max,
    Exp,
    Tanh,
    Clamp,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Clamp => "clamp",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Abs | Func::Exp | Func::Tanh => 1,
            Func::Min | Func::Max => 2,
            Func::Clamp => 3,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    pub const ALL: [Func; 6] = [Func::Abs, Func::Min, Func::Max, Func::Exp, Func::Tanh, Func::Clamp];
}

/// Reward expression tree. Constants are stored in `f64` and converted to
/// the evaluation scalar on use.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Feature(Feature),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Number of nodes, which bounds evaluation cost.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Feature(_) => 1,
            Expr::Neg(e) => 1 + e.size(),
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    pub fn features(&self, out: &mut Vec<Feature>) {
        match self {
            Expr::Num(_) => {}
            Expr::Feature(f) => out.push(*f),
            Expr::Neg(e) => e.features(out),
            Expr::Binary(_, l, r) => {
                l.features(out);
                r.features(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.features(out)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 4,
            _ => 5,
        }
    }
}

pub(crate) fn write_number(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    // Debug formatting of f64 is the shortest representation that round-trips.
    write!(f, "{x:?}")
}

impl fmt::Display for Expr {
    /// Canonical form: minimal parentheses for left-associative operators.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write_number(f, *x),
            Expr::Feature(feat) => write!(f, "{feat}"),
            Expr::Neg(e) => {
                // `-3.0` lexes as a negative literal, so a negated literal keeps its parentheses.
                if e.precedence() < 4 || matches!(**e, Expr::Num(_)) {
                    write!(f, "-({e})")
                } else {
                    write!(f, "-{e}")
                }
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}
