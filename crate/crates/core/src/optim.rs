//! Limited-memory BFGS with Armijo backtracking.
//!
//! Every accepted step strictly decreases the objective, so a fit started at
//! a baseline parameter vector never ends above the baseline's value.

use std::collections::VecDeque;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop once the gradient's infinity norm drops below this.
    pub grad_tol: f64,
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iter: 1000,
            grad_tol: 1e-6,
            memory: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub grad_inf_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after each accepted step, starting with the initial point.
    pub trace: Vec<T>,
}

/// Minimizes `objective`, which returns f(x) and writes ∇f(x) into its second argument.
pub fn minimize<T, F>(mut objective: F, x0: Vec<T>, opts: MinimizeOptions) -> Minimum<T>
where
    T: Real,
    F: FnMut(&[T], &mut [T]) -> T,
{
    let dim = x0.len();
    let tol = T::of(opts.grad_tol);
    let c1 = T::of(1e-4);
    let half = T::of(0.5);

    let mut x = x0;
    let mut grad = vec![T::zero(); dim];
    let mut value = objective(&x, &mut grad);
    let mut trace = vec![value];
    let mut history: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::with_capacity(opts.memory);

    let mut x_new = vec![T::zero(); dim];
    let mut grad_new = vec![T::zero(); dim];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if inf_norm(&grad) < tol {
            break;
        }
        let mut direction = two_loop(&grad, &history);
        let mut slope = dot(&grad, &direction);
        if !(slope < T::zero()) || history.is_empty() {
            history.clear();
            let scale = T::one() / inf_norm(&grad).max(T::one());
            direction = grad.iter().map(|&g| -g * scale).collect();
            slope = dot(&grad, &direction);
        }

        let mut step = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            for ((xn, &xi), &di) in x_new.iter_mut().zip(&x).zip(&direction) {
                *xn = xi + step * di;
            }
            let candidate = objective(&x_new, &mut grad_new);
            if candidate.is_finite() && candidate <= value + c1 * step * slope && candidate < value {
                accepted = Some(candidate);
                break;
            }
            step *= half;
        }
        let Some(new_value) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = grad_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if history.len() == opts.memory {
                history.pop_front();
            }
            history.push_back((s, y, T::one() / sy));
        }
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut grad, &mut grad_new);
        value = new_value;
        trace.push(value);
        iterations += 1;
    }

    let grad_inf_norm = inf_norm(&grad);
    Minimum {
        x,
        value,
        grad_inf_norm,
        iterations,
        converged: grad_inf_norm < tol,
        trace,
    }
}

fn two_loop<T: Real>(grad: &[T], history: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q: Vec<T> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
}
