#![allow(dead_code)]

use musclelab::reward::{BinOp, Expr, Feature, Func, RewardProgram, FEATURE_CATALOG};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Random feature valid on the walker (9 coordinates, 8 contact points).
pub fn random_feature<R: Rng>(rng: &mut R) -> Feature {
    let info = FEATURE_CATALOG.choose(rng).unwrap();
    let index = match info.name {
        "contact_flag" => Some(rng.random_range(0..8)),
        _ if info.indexed => Some(rng.random_range(0..9)),
        _ => None,
    };
    Feature::from_name(info.name, index).unwrap()
}

pub fn random_number<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.random_range(-10i32..=10) as f64,
        1 => rng.random_range(-1.0..1.0),
        2 => rng.random_range(-1e6..1e6),
        _ => rng.random_range(0.0..1e-4),
    }
}

pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    let leaf = depth == 0 || rng.random_bool(0.3);
    if leaf {
        return if rng.random_bool(0.5) {
            Expr::Num(random_number(rng))
        } else {
            Expr::Feature(random_feature(rng))
        };
    }
    match rng.random_range(0..3) {
        0 => Expr::Neg(Box::new(random_expr(rng, depth - 1))),
        1 => {
            let op = *BinOp::ALL.choose(rng).unwrap();
            Expr::binary(op, random_expr(rng, depth - 1), random_expr(rng, depth - 1))
        }
        _ => {
            let f = *Func::ALL.choose(rng).unwrap();
            Expr::Call(f, (0..f.arity()).map(|_| random_expr(rng, depth - 1)).collect())
        }
    }
}

pub fn random_program<R: Rng>(rng: &mut R) -> RewardProgram {
    let mut p = RewardProgram { stage_id: rng.random_range(0..20), ..Default::default() };
    for k in 0..rng.random_range(0..6) {
        let w = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..10.0) };
        p.push(format!("t{k}"), random_expr(rng, 4), w);
    }
    p
}

/// Evaluation-friendly variant: bounded functions only, so values stay finite.
pub fn random_tame_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.5) {
            Expr::Num(rng.random_range(-2.0..2.0))
        } else {
            Expr::Feature(random_feature(rng))
        };
    }
    let ops = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Lt, BinOp::Ge];
    match rng.random_range(0..3) {
        0 => Expr::Neg(Box::new(random_tame_expr(rng, depth - 1))),
        1 => Expr::binary(*ops.choose(rng).unwrap(), random_tame_expr(rng, depth - 1), random_tame_expr(rng, depth - 1)),
        _ => {
            let f = *[Func::Abs, Func::Min, Func::Max, Func::Tanh, Func::Clamp].choose(rng).unwrap();
            Expr::Call(f, (0..f.arity()).map(|_| random_tame_expr(rng, depth - 1)).collect())
        }
    }
}
