use super::{ObjectiveError, TokenId, PAD, QUERY_PREFIX};

/// Lays out `context` in blocks of `block_size`, each opening with
/// `QUERY_PREFIX query...`; the last block is padded.
pub fn qa_format(query: &[TokenId], context: &[TokenId], block_size: usize) -> Result<Vec<TokenId>, ObjectiveError> {
    let header = query.len() + 1;
    if header >= block_size {
        return Err(ObjectiveError::QueryTooLong {
            query_len: query.len(),
            block_size,
        });
    }
    let room = block_size - header;
    let blocks = context.len().div_ceil(room).max(1);
    let mut out = Vec::with_capacity(blocks * block_size);
    for b in 0..blocks {
        out.push(QUERY_PREFIX);
        out.extend_from_slice(query);
        let lo = (b * room).min(context.len());
        let hi = ((b + 1) * room).min(context.len());
        out.extend_from_slice(&context[lo..hi]);
        out.resize((b + 1) * block_size, PAD);
    }
    Ok(out)
}
