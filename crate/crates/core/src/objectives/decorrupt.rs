use super::{ObjectiveError, TokenId, Vocab, MASK_SENTENCE};

/// Splices every target segment back over its sentinel in `input`.
///
/// The target must be a sequence of `sentinel tokens...` segments, the
/// sentinels ascending, matching the input placeholders one to one.
pub fn decorrupt(input: &[TokenId], target: &[TokenId], vocab: &Vocab) -> Result<Vec<TokenId>, ObjectiveError> {
    let mut segments: Vec<(TokenId, &[TokenId])> = Vec::new();
    let mut i = 0;
    while i < target.len() {
        let sentinel = target[i];
        if !vocab.is_sentinel(sentinel) {
            return Err(ObjectiveError::TargetWithoutSentinel { found: sentinel });
        }
        if segments.last().is_some_and(|&(prev, _)| prev >= sentinel) {
            return Err(ObjectiveError::SentinelOrder { sentinel });
        }
        let end = target[i + 1..]
            .iter()
            .position(|&t| vocab.is_sentinel(t))
            .map_or(target.len(), |p| i + 1 + p);
        if end == i + 1 {
            return Err(ObjectiveError::EmptySegment { sentinel });
        }
        segments.push((sentinel, &target[i + 1..end]));
        i = end;
    }

    let mut out = Vec::with_capacity(input.len() + target.len());
    let mut next = segments.iter();
    for (position, &t) in input.iter().enumerate() {
        if !vocab.is_sentinel(t) {
            out.push(t);
            continue;
        }
        match next.next() {
            Some(&(s, tokens)) if s == t => out.extend_from_slice(tokens),
            other => {
                return Err(ObjectiveError::SentinelMismatch {
                    position,
                    expected: other.map(|&(s, _)| s),
                    found: t,
                })
            }
        }
    }
    if let Some(&(sentinel, _)) = next.next() {
        return Err(ObjectiveError::UnusedSegment { sentinel });
    }
    Ok(out)
}

/// Inverse of sentence masking: each mask token in `input` takes the next
/// `lengths[k]` tokens of `target`.
pub fn decorrupt_sentences(
    input: &[TokenId],
    target: &[TokenId],
    lengths: &[usize],
) -> Result<Vec<TokenId>, ObjectiveError> {
    let masks = input.iter().filter(|&&t| t == MASK_SENTENCE).count();
    if masks != lengths.len() {
        return Err(ObjectiveError::MaskCountMismatch {
            masks,
            lengths: lengths.len(),
        });
    }
    let expected: usize = lengths.iter().sum();
    if expected != target.len() {
        return Err(ObjectiveError::TargetLength {
            expected,
            actual: target.len(),
        });
    }
    let mut out = Vec::with_capacity(input.len() + target.len());
    let mut rest = target;
    let mut lens = lengths.iter();
    for &t in input {
        if t == MASK_SENTENCE {
            let (head, tail) = rest.split_at(*lens.next().expect("counted above"));
            out.extend_from_slice(head);
            rest = tail;
        } else {
            out.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_spans_is_identity() {
        let v = Vocab::new(4);
        assert_eq!(decorrupt(&[9, 10, 11], &[], &v).unwrap(), vec![9, 10, 11]);
    }

    #[test]
    fn splices_segments() {
        let v = Vocab::new(4);
        // sentinels are 4..8, corpus ids start at 8
        let out = decorrupt(&[8, 4, 11, 5], &[4, 9, 10, 5, 12, 13], &v).unwrap();
        assert_eq!(out, vec![8, 9, 10, 11, 12, 13]);
    }

    #[test]
    fn structured_errors() {
        let v = Vocab::new(4);
        assert_eq!(
            decorrupt(&[8, 5], &[4, 9], &v),
            Err(ObjectiveError::SentinelMismatch {
                position: 1,
                expected: Some(4),
                found: 5
            })
        );
        assert_eq!(
            decorrupt(&[8, 4], &[4, 9, 5, 10], &v),
            Err(ObjectiveError::UnusedSegment { sentinel: 5 })
        );
        assert_eq!(
            decorrupt(&[4, 4], &[4, 9], &v),
            Err(ObjectiveError::SentinelMismatch {
                position: 1,
                expected: None,
                found: 4
            })
        );
        assert_eq!(
            decorrupt(&[4], &[9, 4], &v),
            Err(ObjectiveError::TargetWithoutSentinel { found: 9 })
        );
        assert_eq!(
            decorrupt(&[5, 4], &[5, 9, 4, 10], &v),
            Err(ObjectiveError::SentinelOrder { sentinel: 4 })
        );
        assert_eq!(
            decorrupt(&[4, 5], &[4, 5, 9], &v),
            Err(ObjectiveError::EmptySegment { sentinel: 4 })
        );
    }

    #[test]
    fn sentence_masks() {
        let out = decorrupt_sentences(&[10, MASK_SENTENCE, 13, MASK_SENTENCE], &[11, 12, 14], &[2, 1]).unwrap();
        assert_eq!(out, vec![10, 11, 12, 13, 14]);
        assert!(decorrupt_sentences(&[MASK_SENTENCE], &[11, 12], &[1]).is_err());
        assert!(decorrupt_sentences(&[MASK_SENTENCE], &[11], &[1, 0]).is_err());
    }
}
