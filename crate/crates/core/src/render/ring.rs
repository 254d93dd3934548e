use std::collections::VecDeque;
use std::sync::Arc;

use crate::frame::Frame;

use super::RenderError;

/// Fixed-capacity buffer of the most recent frames, in contiguous index
/// order.
///
/// Frames are shared behind `Arc`, so a window taken from the buffer stays
/// valid after the producer moves on.
#[derive(Debug, Clone)]
pub struct FrameRingBuffer {
    capacity: usize,
    slots: VecDeque<Arc<Frame>>,
}

impl FrameRingBuffer {
    pub fn new(capacity: usize) -> Result<Self, RenderError> {
        if capacity < 40 {
            return Err(RenderError::CapacityTooSmall(capacity));
        }
        Ok(Self { capacity, slots: VecDeque::with_capacity(capacity) })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Index of the newest frame.
    pub fn head(&self) -> Option<u64> {
        self.slots.back().map(|f| f.index)
    }

    pub fn oldest(&self) -> Option<u64> {
        self.slots.front().map(|f| f.index)
    }

    /// Appends a frame. Its index must follow the head, unless the buffer is
    /// empty. Returns the evicted frame, if any.
    pub fn push(&mut self, frame: Frame) -> Result<Option<Arc<Frame>>, RenderError> {
        self.push_shared(Arc::new(frame))
    }

    pub fn push_shared(&mut self, frame: Arc<Frame>) -> Result<Option<Arc<Frame>>, RenderError> {
        if let Some(h) = self.head() {
            if frame.index != h + 1 {
                return Err(RenderError::NonContiguous { expected: h + 1, got: frame.index });
            }
        }
        let evicted = if self.slots.len() == self.capacity { self.slots.pop_front() } else { None };
        self.slots.push_back(frame);
        Ok(evicted)
    }

    /// Removes and returns the oldest frame.
    pub fn pop_oldest(&mut self) -> Option<Arc<Frame>> {
        self.slots.pop_front()
    }

    pub fn clear(&mut self) {
        self.slots.clear();
    }

    pub fn get(&self, index: u64) -> Option<&Arc<Frame>> {
        let first = self.oldest()?;
        let off = index.checked_sub(first)?;
        self.slots.get(off as usize)
    }

    /// The `m` frames ending at `end` (inclusive), ascending.
    pub fn window_ending_at(&self, end: u64, m: usize) -> Result<Vec<Arc<Frame>>, RenderError> {
        let (Some(first), Some(head)) = (self.oldest(), self.head()) else {
            return Err(RenderError::InsufficientFrames { needed: m, available: 0 });
        };
        if end > head || end < first {
            return Err(RenderError::InsufficientFrames { needed: m, available: 0 });
        }
        let available = (end - first + 1) as usize;
        if available < m {
            return Err(RenderError::InsufficientFrames { needed: m, available });
        }
        let stop = (end - first) as usize + 1;
        Ok(self.slots.range(stop - m..stop).cloned().collect())
    }

    /// The `m` most recent frames, ascending.
    pub fn latest_window(&self, m: usize) -> Result<Vec<Arc<Frame>>, RenderError> {
        match self.head() {
            Some(h) => self.window_ending_at(h, m),
            None => Err(RenderError::InsufficientFrames { needed: m, available: 0 }),
        }
    }
}

pub fn latest_window(buffer: &FrameRingBuffer, m: usize) -> Result<Vec<Arc<Frame>>, RenderError> {
    buffer.latest_window(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(i: u64) -> Frame {
        Frame::filled(i, 1, 1, [i as u8, 0, 0])
    }

    fn filled(range: std::ops::RangeInclusive<u64>, cap: usize) -> FrameRingBuffer {
        let mut b = FrameRingBuffer::new(cap).unwrap();
        for i in range {
            b.push(tiny(i)).unwrap();
        }
        b
    }

    fn indices(w: &[Arc<Frame>]) -> Vec<u64> {
        w.iter().map(|f| f.index).collect()
    }

    #[test]
    fn exact_fill() {
        let b = filled(0..=39, 40);
        assert_eq!(indices(&latest_window(&b, 40).unwrap()), (0..=39).collect::<Vec<_>>());
    }

    #[test]
    fn partial_range() {
        let b = filled(5..=60, 64);
        assert_eq!(indices(&latest_window(&b, 40).unwrap()), (21..=60).collect::<Vec<_>>());
    }

    #[test]
    fn insufficient() {
        let b = filled(0..=9, 40);
        assert!(matches!(
            latest_window(&b, 40),
            Err(RenderError::InsufficientFrames { needed: 40, available: 10 })
        ));
    }

    #[test]
    fn rejects_gaps_and_small_capacity() {
        let mut b = filled(0..=3, 40);
        assert!(b.push(tiny(5)).is_err());
        assert!(FrameRingBuffer::new(39).is_err());
    }

    #[test]
    fn eviction_returns_oldest() {
        let mut b = filled(0..=39, 40);
        let ev = b.push(tiny(40)).unwrap().unwrap();
        assert_eq!(ev.index, 0);
        assert_eq!(b.oldest(), Some(1));
    }

    proptest! {
        #[test]
        fn windows_always_contiguous(ops in proptest::collection::vec((1u8..6, 1usize..60), 1..80), cap in 40usize..70) {
            let mut b = FrameRingBuffer::new(cap).unwrap();
            let mut next = 0u64;
            for (pushes, m) in ops {
                for _ in 0..pushes {
                    b.push(tiny(next)).unwrap();
                    next += 1;
                }
                prop_assert_eq!(b.len() as u64, next.min(cap as u64));
                match b.latest_window(m) {
                    Ok(w) => {
                        prop_assert_eq!(w.len(), m);
                        prop_assert_eq!(w.last().unwrap().index, next - 1);
                        prop_assert!(w.windows(2).all(|p| p[1].index == p[0].index + 1));
                    }
                    Err(_) => prop_assert!(b.len() < m),
                }
            }
        }
    }
}
