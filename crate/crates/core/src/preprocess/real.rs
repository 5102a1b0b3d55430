//! Scalar types the projection datapath is generic over.
//!
//! The functional path runs in `f32`. [`Fp16Emu`] rounds to binary16 after
//! every operation, and [`Counted`] tallies the arithmetic it performs.

use std::cell::Cell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use half::f16;
use serde::{Deserialize, Serialize};

pub trait Real:
    Copy
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn lit(v: f32) -> Self;
    fn get(self) -> f32;
    fn sqrt(self) -> Self;

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Real for f32 {
    #[inline(always)]
    fn lit(v: f32) -> Self {
        v
    }
    #[inline(always)]
    fn get(self) -> f32 {
        self
    }
    #[inline(always)]
    fn sqrt(self) -> Self {
        f32::sqrt(self)
    }
}

/// `f32` storage rounded to the nearest binary16 value after every operation.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Fp16Emu(f32);

impl Fp16Emu {
    #[inline]
    fn round(v: f32) -> Self {
        Self(f16::from_f32(v).to_f32())
    }
}

macro_rules! binop {
    ($ty:ident, $tr:ident, $m:ident, $op:tt, $count:ident) => {
        impl $tr for $ty {
            type Output = Self;
            #[inline]
            #[allow(clippy::suspicious_arithmetic_impl)]
            fn $m(self, rhs: Self) -> Self {
                $ty::finish(self.0 $op rhs.0, |t| t.$count += 1)
            }
        }
    };
}

impl Fp16Emu {
    #[inline]
    fn finish(v: f32, _tally: impl FnOnce(&mut OpTally)) -> Self {
        Self::round(v)
    }
}

binop!(Fp16Emu, Add, add, +, add);
binop!(Fp16Emu, Sub, sub, -, sub);
binop!(Fp16Emu, Mul, mul, *, mul);
binop!(Fp16Emu, Div, div, /, div);

impl Neg for Fp16Emu {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Real for Fp16Emu {
    fn lit(v: f32) -> Self {
        Self::round(v)
    }
    fn get(self) -> f32 {
        self.0
    }
    fn sqrt(self) -> Self {
        Self::round(self.0.sqrt())
    }
}

/// Counts of arithmetic operations by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpTally {
    pub add: u64,
    pub mul: u64,
    pub div: u64,
    pub sub: u64,
    /// Square roots; not part of [`OpTally::total`].
    #[serde(default)]
    pub sqrt: u64,
}

impl OpTally {
    pub const fn new(add: u64, mul: u64, div: u64, sub: u64) -> Self {
        Self { add, mul, div, sub, sqrt: 0 }
    }

    pub fn total(&self) -> u64 {
        self.add + self.mul + self.div + self.sub
    }

    pub fn scaled(&self, n: u64) -> Self {
        Self {
            add: self.add * n,
            mul: self.mul * n,
            div: self.div * n,
            sub: self.sub * n,
            sqrt: self.sqrt * n,
        }
    }

    /// Component-wise `self - other`, signed.
    pub fn delta(&self, other: &Self) -> [i64; 4] {
        [
            self.add as i64 - other.add as i64,
            self.mul as i64 - other.mul as i64,
            self.div as i64 - other.div as i64,
            self.sub as i64 - other.sub as i64,
        ]
    }
}

thread_local! {
    static TALLY: Cell<OpTally> = const { Cell::new(OpTally::new(0, 0, 0, 0)) };
}

/// `f32` that records every operation into a thread-local [`OpTally`].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Counted(f32);

impl Counted {
    #[inline]
    fn finish(v: f32, tally: impl FnOnce(&mut OpTally)) -> Self {
        TALLY.with(|t| {
            let mut cur = t.get();
            tally(&mut cur);
            t.set(cur);
        });
        Self(v)
    }

    /// Runs `f` and returns the operations it performed on `Counted` values.
    pub fn measure<T>(f: impl FnOnce() -> T) -> (T, OpTally) {
        let saved = TALLY.with(|t| t.replace(OpTally::default()));
        let out = f();
        let tally = TALLY.with(|t| t.replace(saved));
        (out, tally)
    }
}

binop!(Counted, Add, add, +, add);
binop!(Counted, Sub, sub, -, sub);
binop!(Counted, Mul, mul, *, mul);
binop!(Counted, Div, div, /, div);

impl Neg for Counted {
    type Output = Self;
    fn neg(self) -> Self {
        Self(-self.0)
    }
}

impl Real for Counted {
    fn lit(v: f32) -> Self {
        Self(v)
    }
    fn get(self) -> f32 {
        self.0
    }
    fn sqrt(self) -> Self {
        Self::finish(self.0.sqrt(), |t| t.sqrt += 1)
    }
}
