/**
 * Pending-changes review queue.
 *
 * Each event renders its cell-level diff (formula and value before/after,
 * the minimum a reviewer needs for independent judgment) plus approve and
 * reject actions.  Server errors (self-review, missing-comment,
 * not-pending) surface verbatim; on not-pending the queue refreshes since
 * someone else settled the event.
 */

import { ApiClient, ApiError } from '../api.js';
import { clear, el } from '../dom.js';
import type { CellChange, CellPayload, ChangeEvent } from '../types.js';

export function describeCell(payload: CellPayload | null): { formula: string; value: string } {
  if (payload === null) {
    return { formula: '—', value: '(absent)' };
  }
  const value = payload.t === 'blank' ? '(blank)' : String(payload.v);
  return { formula: payload.f ? '=' + payload.f : '—', value };
}

export function diffRow(change: CellChange): HTMLTableRowElement {
  const before = describeCell(change.before);
  const after = describeCell(change.after);
  return el(
    'tr',
    { class: `diff-${change.kind}` },
    el('td', {}, `${change.sheet}!${change.addr}`),
    el('td', {}, change.kind.replace('_', ' ')),
    el('td', {}, before.formula),
    el('td', {}, before.value),
    el('td', {}, after.formula),
    el('td', {}, after.value),
  );
}

function renderEvent(
  event: ChangeEvent,
  client: ApiClient,
  refresh: () => void,
): HTMLElement {
  const card = el('section', { class: 'event-card', 'data-event-id': String(event.event_id) });
  card.append(
    el(
      'header',
      {},
      el('strong', {}, `#${event.event_id} ${event.file_key}`),
      el('span', {}, ` by ${event.author}`),
      el('span', { class: 'triggers' }, ` triggered: ${event.triggered_rules.join(', ')}`),
    ),
  );

  const table = el('table', { class: 'diff-table' });
  table.append(
    el(
      'tr',
      {},
      ...['Cell', 'Kind', 'Formula before', 'Value before', 'Formula after', 'Value after'].map(
        (h) => el('th', {}, h),
      ),
    ),
  );
  for (const change of event.changes) {
    table.append(diffRow(change));
  }
  card.append(table);
  if (event.structural) {
    card.append(el('p', { class: 'structural-note' }, 'Structural change'));
  }

  const comment = el('input', {
    type: 'text',
    placeholder: 'Review comment (required to reject)',
    class: 'comment-input',
  });
  const errorSlot = el('span', { class: 'decision-error', role: 'alert' });
  const approve = el('button', { class: 'approve' }, 'Approve');
  const reject = el('button', { class: 'reject' }, 'Reject');

  async function submit(verdict: 'approved' | 'rejected') {
    errorSlot.textContent = '';
    try {
      await client.decide(event.event_id, verdict, comment.value);
      refresh();
    } catch (error) {
      if (error instanceof ApiError) {
        errorSlot.textContent = error.problem.message;
        if (error.problem.code === 'not-pending') {
          refresh();
        }
        return;
      }
      errorSlot.textContent = String(error);
    }
  }

  approve.addEventListener('click', () => void submit('approved'));
  reject.addEventListener('click', () => void submit('rejected'));
  card.append(el('footer', {}, comment, approve, reject, errorSlot));
  return card;
}

export function renderQueue(
  root: HTMLElement,
  events: ChangeEvent[],
  client: ApiClient,
  refresh: () => void,
): void {
  clear(root);
  if (events.length === 0) {
    root.append(el('p', { class: 'empty-state' }, 'Nothing waiting for review.'));
    return;
  }
  for (const event of events) {
    root.append(renderEvent(event, client, refresh));
  }
}
