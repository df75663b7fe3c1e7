use crate::game::{GameGraph, StateKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Player {
    One,
    Two,
}

impl Player {
    fn owns(self, kind: StateKind) -> bool {
        matches!(
            (self, kind),
            (Player::One, StateKind::Player1) | (Player::Two, StateKind::Player2)
        )
    }
}

/// States from which `player` can reach `t` with positive probability
/// whatever the opponent does, ascending.
///
/// Least set containing `t` and closed under: a state of `player` or a
/// probabilistic state with some successor in the set, and an opponent state
/// with all successors in the set.
pub fn positive_reach_set(graph: &GameGraph, player: Player, t: usize) -> Vec<usize> {
    let (offsets, sources) = graph.predecessors();
    let mut inside = vec![false; graph.num_states()];
    reach_into(graph, &offsets, &sources, player, t, &mut inside);
    (0..graph.num_states()).filter(|&s| inside[s]).collect()
}

fn reach_into(graph: &GameGraph, offsets: &[usize], sources: &[u32], player: Player, t: usize, inside: &mut [bool]) {
    let mut missing: Vec<usize> = (0..graph.num_states())
        .map(|s| graph.successors(s).len())
        .collect();
    inside.iter_mut().for_each(|b| *b = false);
    inside[t] = true;
    let mut stack = vec![t];
    while let Some(q) = stack.pop() {
        for &p in &sources[offsets[q]..offsets[q + 1]] {
            let p = p as usize;
            if inside[p] {
                continue;
            }
            let kind = graph.kind(p);
            let joins = if player.owns(kind) || kind == StateKind::Probabilistic {
                true
            } else {
                missing[p] -= 1;
                missing[p] == 0
            };
            if joins {
                inside[p] = true;
                stack.push(p);
            }
        }
    }
}

/// Looks for a state both players can reach with positive probability from
/// everywhere; such a state guarantees that the long-run value is the same
/// from every state. Returns the first witness.
pub fn check_uniform_value(graph: &GameGraph) -> (bool, Option<usize>) {
    let (offsets, sources) = graph.predecessors();
    let mut inside = vec![false; graph.num_states()];
    for t in 0..graph.num_states() {
        let full = |inside: &[bool]| inside.iter().all(|&b| b);
        reach_into(graph, &offsets, &sources, Player::One, t, &mut inside);
        if !full(&inside) {
            continue;
        }
        reach_into(graph, &offsets, &sources, Player::Two, t, &mut inside);
        if full(&inside) {
            return (true, Some(t));
        }
    }
    (false, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameBuilder;

    #[test]
    fn unreachable_target_is_alone() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[0]);
        b.add_player(StateKind::Player1, 0.0, &[1]);
        let g = b.build().unwrap();
        assert_eq!(positive_reach_set(&g, Player::One, 0), vec![0]);
    }

    #[test]
    fn chain_reaches() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[1]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        let g = b.build().unwrap();
        assert_eq!(positive_reach_set(&g, Player::One, 2), vec![0, 1, 2]);
    }

    #[test]
    fn opponent_can_avoid() {
        // 0 is a player-2 state choosing between the target 1 and a trap 2
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player2, 0.0, &[1, 2]);
        b.add_player(StateKind::Player1, 0.0, &[1]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        let g = b.build().unwrap();
        assert_eq!(positive_reach_set(&g, Player::One, 1), vec![1]);
        assert_eq!(positive_reach_set(&g, Player::Two, 1), vec![0, 1]);
    }

    #[test]
    fn uniform_value_checks() {
        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[1]);
        b.add_player(StateKind::Player1, 0.0, &[2]);
        b.add_player(StateKind::Player1, 0.0, &[0]);
        let g = b.build().unwrap();
        assert_eq!(check_uniform_value(&g), (true, Some(0)));

        let mut b = GameBuilder::new();
        b.add_player(StateKind::Player1, 0.0, &[0]);
        b.add_player(StateKind::Player1, 1.0, &[1]);
        let g = b.build().unwrap();
        assert_eq!(check_uniform_value(&g), (false, None));
    }
}
