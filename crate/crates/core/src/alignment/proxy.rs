use serde::{Deserialize, Serialize};

use super::AlignmentError;
use crate::trajectory::{context_images, ContextItem};

/// Decoupled prompts for one truncated step. `p_i2i` and `i_ref` are set
/// exactly when the context already holds images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProxyPrompts {
    pub p_t2i: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_i2i: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_ref: Option<Vec<usize>>,
}

pub trait ProxyExtractor: Send + Sync {
    fn extract(&self, context: &[ContextItem]) -> Result<ProxyPrompts, AlignmentError>;
}

/// Concatenates every reasoning text for `p_t2i`, uses the last reasoning as
/// `p_i2i` and references the most recent image.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimExtractor;

impl ProxyExtractor for SimExtractor {
    fn extract(&self, context: &[ContextItem]) -> Result<ProxyPrompts, AlignmentError> {
        let reasoning: Vec<&str> = context
            .iter()
            .filter_map(|item| match item {
                ContextItem::Reasoning(r) => Some(r.as_str()),
                _ => None,
            })
            .collect();
        let t = context_images(context).len();
        let p_t2i = reasoning.join("\n");
        if t == 0 {
            return Ok(ProxyPrompts { p_t2i, p_i2i: None, i_ref: None });
        }
        Ok(ProxyPrompts {
            p_t2i,
            p_i2i: Some(reasoning.last().copied().unwrap_or_default().to_string()),
            i_ref: Some(vec![t - 1]),
        })
    }
}

/// Run `extractor` and check the result against the context's image list.
pub fn extract_proxy(context: &[ContextItem], extractor: &dyn ProxyExtractor) -> Result<ProxyPrompts, AlignmentError> {
    let images = context_images(context).len();
    if !matches!(context.first(), Some(ContextItem::Prompt(_)))
        || !matches!(context.last(), Some(ContextItem::Reasoning(_)))
    {
        return Err(AlignmentError::ProxyShape {
            t: images,
            message: "context must start with the prompt and end with the current reasoning".into(),
        });
    }
    let proxy = extractor.extract(context)?;
    match (images, &proxy.p_i2i, &proxy.i_ref) {
        (0, None, None) => {}
        (0, _, _) => {
            return Err(AlignmentError::ProxyShape { t: 0, message: "t = 0 takes only a T2I prompt".into() });
        }
        (t, Some(_), Some(refs)) => {
            if refs.is_empty() {
                return Err(AlignmentError::ProxyShape { t, message: "empty reference set".into() });
            }
            if let Some(&index) = refs.iter().find(|&&i| i >= images) {
                return Err(AlignmentError::ProxyIndex { index, images });
            }
        }
        (t, _, _) => {
            return Err(AlignmentError::ProxyShape { t, message: "t > 0 needs both p_i2i and i_ref".into() });
        }
    }
    Ok(proxy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{fixtures, truncate_at};

    struct Fixed(ProxyPrompts);

    impl ProxyExtractor for Fixed {
        fn extract(&self, _: &[ContextItem]) -> Result<ProxyPrompts, AlignmentError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn branches() {
        let traj = fixtures::trajectory("a", 3);
        let first = extract_proxy(&truncate_at(&traj, 0).unwrap().context, &SimExtractor).unwrap();
        assert_eq!((first.p_i2i, first.i_ref), (None, None));

        let third = extract_proxy(&truncate_at(&traj, 2).unwrap().context, &SimExtractor).unwrap();
        assert!(third.i_ref.unwrap().iter().all(|&i| i < 2));
        assert!(third.p_i2i.is_some());
    }

    #[test]
    fn out_of_range_reference() {
        let traj = fixtures::trajectory("a", 3);
        let ctx = truncate_at(&traj, 2).unwrap().context;
        let bad = Fixed(ProxyPrompts { p_t2i: "x".into(), p_i2i: Some("y".into()), i_ref: Some(vec![5]) });
        assert_eq!(extract_proxy(&ctx, &bad), Err(AlignmentError::ProxyIndex { index: 5, images: 2 }));
        let half = Fixed(ProxyPrompts { p_t2i: "x".into(), p_i2i: Some("y".into()), i_ref: None });
        assert!(extract_proxy(&ctx, &half).is_err());
        let t0 = truncate_at(&traj, 0).unwrap().context;
        assert!(extract_proxy(&t0, &half).is_err());
    }
}
