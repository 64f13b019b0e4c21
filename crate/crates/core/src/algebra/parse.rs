//! Text to [`BivarPoly`].
//!
//! Accepts sums of terms like `3/2*x*y`, `x^2y`, `(1+2i)*y^3`, `0.25x`, and
//! parenthesised sub-expressions such as `(y-2)*(x^2+y^2-1)`. Numbers are
//! converted exactly: decimals become rationals and `i` is the imaginary
//! unit. Division is only allowed by nonzero constants.

use num_bigint::BigInt;
use num_rational::BigRational;

use super::{BivarPoly, Mono, Scalar};
use crate::error::Error;

pub fn parse_poly(text: &str) -> Result<BivarPoly, Error> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.at_end() {
        return Err(p.err("empty polynomial"));
    }
    let out = p.expr()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn expr(&mut self) -> Result<BivarPoly, Error> {
        let mut acc = BivarPoly::zero();
        let mut sign = 1i64;
        self.skip_ws();
        match self.peek() {
            Some(b'+') => self.pos += 1,
            Some(b'-') => {
                self.pos += 1;
                sign = -1;
            }
            _ => {}
        }
        loop {
            let t = self.term()?;
            acc = if sign > 0 { &acc + &t } else { &acc - &t };
            self.skip_ws();
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1;
                }
                _ => return Ok(acc),
            }
        }
    }

    /// Factors joined by `*`, `/` (constant divisor) or juxtaposition.
    fn term(&mut self) -> Result<BivarPoly, Error> {
        let mut acc = self.power()?;
        loop {
            self.skip_ws();
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let f = self.power()?;
                    acc = &acc * &f;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let f = self.power()?;
                    let c = match (f.degree(), f.coeff(Mono::ONE).inv()) {
                        (Some(0), Some(inv)) => inv,
                        _ => {
                            return Err(Error::Parse {
                                pos: at,
                                msg: "division by a non-constant or zero".into(),
                            })
                        }
                    };
                    acc = acc.scale(&c);
                }
                Some(c) if c == b'(' || c == b'.' || c.is_ascii_alphanumeric() => {
                    let f = self.power()?;
                    acc = &acc * &f;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<BivarPoly, Error> {
        let base = self.primary()?;
        self.skip_ws();
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return Err(self.err("expected exponent"));
            }
            let e: u32 = std::str::from_utf8(&self.src[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| Error::Parse { pos: start, msg: "exponent too large".into() })?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<BivarPoly, Error> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(b'x') => {
                self.pos += 1;
                Ok(BivarPoly::x())
            }
            Some(b'y') => {
                self.pos += 1;
                Ok(BivarPoly::y())
            }
            Some(b'i') => {
                self.pos += 1;
                Ok(BivarPoly::constant(Scalar::i()))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let r = self.number()?;
                Ok(BivarPoly::constant(Scalar::real(r)))
            }
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                    self.pos += 1;
                }
                let name = String::from_utf8_lossy(&self.src[start..self.pos]).into_owned();
                Err(Error::UnknownVariable { pos: start, name })
            }
            Some(_) => Err(self.err("unexpected character")),
        }
    }

    /// Unsigned decimal literal, converted exactly.
    fn number(&mut self) -> Result<BigRational, Error> {
        let start = self.pos;
        let mut digits = String::new();
        let mut frac_len: i64 = 0;
        let mut seen_dot = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(c as char);
                if seen_dot {
                    frac_len += 1;
                }
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if digits.is_empty() {
            return Err(Error::Parse { pos: start, msg: "malformed number".into() });
        }
        let mut exp10: i64 = -frac_len;
        // Scientific suffix, only when followed by a digit so `2e` stays an error elsewhere.
        if matches!(self.peek(), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            let mut esign = 1i64;
            match self.peek() {
                Some(b'-') => {
                    esign = -1;
                    self.pos += 1;
                }
                Some(b'+') => self.pos += 1,
                _ => {}
            }
            let es = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            if es == self.pos {
                self.pos = save;
            } else {
                let e: i64 = std::str::from_utf8(&self.src[es..self.pos])
                    .unwrap()
                    .parse()
                    .map_err(|_| Error::Parse { pos: es, msg: "exponent too large".into() })?;
                exp10 += esign * e;
            }
        }
        let n: BigInt = digits.parse().unwrap();
        let ten = BigInt::from(10);
        let r = if exp10 >= 0 {
            BigRational::from_integer(n * num_traits::pow(ten, exp10 as usize))
        } else {
            BigRational::new(n, num_traits::pow(ten, (-exp10) as usize))
        };
        Ok(r)
    }
}

/// Parses a scalar such as `-3/2`, `0.5`, or `(1+2i)`.
pub fn parse_scalar(text: &str) -> Result<Scalar, Error> {
    let p = parse_poly(text)?;
    match p.degree() {
        None => Ok(Scalar::zero()),
        Some(0) => Ok(p.coeff(Mono::ONE)),
        Some(_) => Err(Error::Parse { pos: 0, msg: format!("expected a constant, got '{text}'") }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grammar_examples() {
        let p = parse_poly("x^2 + y^2 - 1").unwrap();
        assert_eq!(p.coeff(Mono::new(2, 0)), Scalar::from_int(1));
        assert_eq!(p.coeff(Mono::ONE), Scalar::from_int(-1));
        let q = parse_poly("3/2*x*y").unwrap();
        assert_eq!(q.coeff(Mono::new(1, 1)), Scalar::from_frac(3, 2));
        let r = parse_poly("(1+2i)*y^3").unwrap();
        assert_eq!(r.coeff(Mono::new(0, 3)), Scalar::gaussian(1, 2));
        assert_eq!(r.num_terms(), 1);
    }

    #[test]
    fn juxtaposition_and_decimals() {
        assert_eq!(parse_poly("x^2y").unwrap(), parse_poly("x^2*y").unwrap());
        assert_eq!(parse_poly("0.25x").unwrap(), parse_poly("1/4*x").unwrap());
        assert_eq!(parse_poly("1.5e-1").unwrap(), parse_poly("3/20").unwrap());
        assert_eq!(parse_poly(" - x  y ").unwrap(), parse_poly("-x*y").unwrap());
        assert_eq!(
            parse_poly("(y-2)*(x^2+y^2-1)").unwrap(),
            parse_poly("x^2*y + y^3 - 2*x^2 - 2*y^2 - y + 2").unwrap()
        );
    }

    #[test]
    fn errors_carry_position() {
        match parse_poly("x + z^2") {
            Err(Error::UnknownVariable { pos, name }) => {
                assert_eq!(pos, 4);
                assert_eq!(name, "z");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_poly("x + * y"), Err(Error::Parse { pos: 4, .. })));
        assert!(matches!(parse_poly("x/y"), Err(Error::Parse { .. })));
        assert!(matches!(parse_poly("(x+1"), Err(Error::Parse { .. })));
        assert!(parse_poly("").is_err());
    }

    #[test]
    fn canonical_print_round_trips() {
        for s in ["x^2 + y^2 - 1", "3/2*x*y", "(1+2i)*y^3 - x + (-i)", "0", "-x^3*y + 7/5"] {
            let p = parse_poly(s).unwrap();
            let printed = p.to_string();
            assert_eq!(parse_poly(&printed).unwrap(), p, "{s} -> {printed}");
            assert_eq!(parse_poly(&printed).unwrap().to_string(), printed);
        }
        assert_eq!(parse_poly("y^2 + x^2 - 1").unwrap().to_string(), "x^2 + y^2 - 1");
    }
}
