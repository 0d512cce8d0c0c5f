/// Dense table over a set of discrete variables, last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Factor {
    pub vars: Vec<usize>,
    pub cards: Vec<usize>,
    pub values: Vec<f64>,
}

impl Factor {
    pub fn new(vars: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(vars.len(), cards.len());
        debug_assert_eq!(values.len(), cards.iter().product::<usize>());
        Self {
            vars,
            cards,
            values,
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self::new(Vec::new(), Vec::new(), vec![value])
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.vars.len()];
        for i in (0..self.vars.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    pub fn contains(&self, var: usize) -> bool {
        self.vars.contains(&var)
    }

    /// Pointwise product over the union of both scopes.
    pub fn product(&self, other: &Factor) -> Factor {
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.vars.iter().zip(&other.cards) {
            if !vars.contains(v) {
                vars.push(*v);
                cards.push(*c);
            }
        }
        let size: usize = cards.iter().product();
        let self_strides = self.strides();
        let other_strides = other.strides();
        // stride of each output variable inside each input (0 if absent)
        let map = |f: &Factor, strides: &[usize]| -> Vec<usize> {
            vars.iter()
                .map(|v| f.vars.iter().position(|x| x == v).map_or(0, |p| strides[p]))
                .collect()
        };
        let a_map = map(self, &self_strides);
        let b_map = map(other, &other_strides);

        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; vars.len()];
        let (mut ai, mut bi) = (0usize, 0usize);
        for _ in 0..size {
            values.push(self.values[ai] * other.values[bi]);
            // odometer increment, last variable fastest
            for d in (0..vars.len()).rev() {
                assignment[d] += 1;
                ai += a_map[d];
                bi += b_map[d];
                if assignment[d] < cards[d] {
                    break;
                }
                ai -= a_map[d] * cards[d];
                bi -= b_map[d] * cards[d];
                assignment[d] = 0;
            }
        }
        Factor::new(vars, cards, values)
    }

    /// Sums `var` out of the scope.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let card = self.cards[pos];
        let inner = strides[pos];
        let outer = self.values.len() / (card * inner);
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..card {
                let base = o * card * inner + k * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor::new(vars, cards, values)
    }

    /// Fixes `var = state` and drops it from the scope.
    pub fn reduce(&self, var: usize, state: usize) -> Factor {
        let Some(pos) = self.vars.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let strides = self.strides();
        let card = self.cards[pos];
        let inner = strides[pos];
        let outer = self.values.len() / (card * inner);
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * card * inner + state * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut vars = self.vars.clone();
        let mut cards = self.cards.clone();
        vars.remove(pos);
        cards.remove(pos);
        Factor::new(vars, cards, values)
    }

    /// Reorders the scope to `order` (a permutation of `vars`).
    pub fn permuted(&self, order: &[usize]) -> Factor {
        if order == self.vars.as_slice() {
            return self.clone();
        }
        let strides = self.strides();
        let src: Vec<usize> = order
            .iter()
            .map(|v| {
                self.vars
                    .iter()
                    .position(|x| x == v)
                    .expect("permutation of scope")
            })
            .collect();
        let cards: Vec<usize> = src.iter().map(|&p| self.cards[p]).collect();
        let mut values = Vec::with_capacity(self.values.len());
        let mut assignment = vec![0usize; order.len()];
        for _ in 0..self.values.len() {
            let idx: usize = assignment
                .iter()
                .zip(&src)
                .map(|(a, &p)| a * strides[p])
                .sum();
            values.push(self.values[idx]);
            for d in (0..order.len()).rev() {
                assignment[d] += 1;
                if assignment[d] < cards[d] {
                    break;
                }
                assignment[d] = 0;
            }
        }
        Factor::new(order.to_vec(), cards, values)
    }
}
