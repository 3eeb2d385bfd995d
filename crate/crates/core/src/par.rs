//! Bounded parallel map that keeps input order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item on at most `limit` threads; results come back
/// in input order regardless of completion order.
pub fn parallel_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("result slot").expect("every index processed")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..200).collect();
        let out = parallel_map(&items, 8, |&x| {
            std::thread::sleep(std::time::Duration::from_micros((200 - x) * 10));
            x * 2
        });
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn empty_and_serial() {
        assert!(parallel_map(&Vec::<u8>::new(), 4, |&x| x).is_empty());
        assert_eq!(parallel_map(&[1, 2, 3], 0, |&x| x + 1), vec![2, 3, 4]);
    }
}
