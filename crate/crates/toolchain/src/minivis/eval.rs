//! Per-pixel evaluation.

use super::check::{Builtin, Expr, Function, Program};
use super::parse::BinOp;

/// A scalar or an RGB triple. Operations broadcast scalars over colors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Scalar(f64),
    Color([f64; 3]),
}

impl Value {
    fn channel(self, i: usize) -> f64 {
        match self {
            Value::Scalar(v) => v,
            Value::Color(c) => c[i],
        }
    }

    fn map(self, f: impl Fn(f64) -> f64) -> Value {
        match self {
            Value::Scalar(v) => Value::Scalar(f(v)),
            Value::Color(c) => Value::Color(c.map(f)),
        }
    }

    fn zip(self, other: Value, f: impl Fn(f64, f64) -> f64) -> Value {
        match (self, other) {
            (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(f(a, b)),
            _ => Value::Color([0, 1, 2].map(|i| f(self.channel(i), other.channel(i)))),
        }
    }

    fn zip3(a: Value, b: Value, c: Value, f: impl Fn(f64, f64, f64) -> f64) -> Value {
        match (a, b, c) {
            (Value::Scalar(a), Value::Scalar(b), Value::Scalar(c)) => Value::Scalar(f(a, b, c)),
            _ => Value::Color([0, 1, 2].map(|i| f(a.channel(i), b.channel(i), c.channel(i)))),
        }
    }

    pub fn rgb(self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.channel(i))
    }
}

pub struct Env<'a> {
    pub slots: &'a [f64],
    pub functions: &'a [Function],
    pub x: f64,
    pub y: f64,
}

pub fn eval(expr: &Expr, env: &Env<'_>, locals: &[Value]) -> Value {
    match expr {
        Expr::Const(v) => Value::Scalar(*v),
        Expr::X => Value::Scalar(env.x),
        Expr::Y => Value::Scalar(env.y),
        Expr::Slot(i) => Value::Scalar(env.slots[*i]),
        Expr::Local(i) => locals[*i],
        Expr::Neg(a) => eval(a, env, locals).map(|v| -v),
        Expr::Bin(op, a, b) => {
            let (a, b) = (eval(a, env, locals), eval(b, env, locals));
            match op {
                BinOp::Add => a.zip(b, |p, q| p + q),
                BinOp::Sub => a.zip(b, |p, q| p - q),
                BinOp::Mul => a.zip(b, |p, q| p * q),
                BinOp::Div => a.zip(b, |p, q| p / q),
            }
        }
        Expr::Builtin(f, args) => {
            let v = |i: usize| eval(&args[i], env, locals);
            match f {
                Builtin::Sin => v(0).map(f64::sin),
                Builtin::Cos => v(0).map(f64::cos),
                Builtin::Sqrt => v(0).map(f64::sqrt),
                Builtin::Abs => v(0).map(f64::abs),
                Builtin::Floor => v(0).map(f64::floor),
                Builtin::Min => v(0).zip(v(1), f64::min),
                Builtin::Max => v(0).zip(v(1), f64::max),
                Builtin::Clamp => Value::zip3(v(0), v(1), v(2), |x, lo, hi| x.max(lo).min(hi)),
                Builtin::Step => v(0).zip(v(1), |edge, x| if x < edge { 0.0 } else { 1.0 }),
                Builtin::Mix => Value::zip3(v(0), v(1), v(2), |a, b, t| a + (b - a) * t),
                Builtin::Rgb => {
                    let (r, g, b) = (v(0), v(1), v(2));
                    Value::Color([r.channel(0), g.channel(1), b.channel(2)])
                }
            }
        }
        Expr::Call(i, args) => {
            let frame: Vec<Value> = args.iter().map(|a| eval(a, env, locals)).collect();
            eval(&env.functions[*i].body, env, &frame)
        }
    }
}

/// Map a channel value to a byte; non-finite values become 0.
pub fn to_byte(c: f64) -> u8 {
    if !c.is_finite() {
        return 0;
    }
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn render(program: &Program, slots: &[f64], width: u32, height: u32) -> Vec<u8> {
    let mut data = Vec::with_capacity(width as usize * height as usize * 3);
    for row in 0..height {
        for col in 0..width {
            let env = Env {
                slots,
                functions: &program.functions,
                x: (col as f64 + 0.5) / width as f64,
                y: (row as f64 + 0.5) / height as f64,
            };
            data.extend(eval(&program.pixel, &env, &[]).rgb().map(to_byte));
        }
    }
    data
}
