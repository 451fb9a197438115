/** Read-only compliance dashboard over GET /api/summary. */

import { clear, el } from '../dom.js';
import type { Summary, TierName } from '../types.js';

const TIERS: TierName[] = ['critical', 'significant', 'standard'];

export function renderDashboard(root: HTMLElement, summary: Summary): void {
  clear(root);
  root.append(
    el(
      'p',
      { class: 'headline' },
      `${summary.total_records} applications — `,
      el('span', { 'data-count': 'financial' }, String(summary.active_by_category.financial)),
      ' financial / ',
      el('span', { 'data-count': 'operational' }, String(summary.active_by_category.operational)),
      ' operational active',
    ),
  );

  const table = el('table', { class: 'summary-table' });
  table.append(
    el('tr', {}, el('th', {}, 'Category'), ...TIERS.map((t) => el('th', {}, t))),
  );
  for (const category of ['financial', 'operational'] as const) {
    table.append(
      el(
        'tr',
        {},
        el('td', {}, category),
        ...TIERS.map((tier) => {
          const byStatus = summary.counts[category][tier];
          const active = byStatus.active ?? 0;
          return el('td', { 'data-cell': `${category}-${tier}` }, String(active));
        }),
      ),
    );
  }
  root.append(table);

  const chips = el('div', { class: 'validation-chips' });
  for (const [state, count] of Object.entries(summary.validation_states)) {
    chips.append(
      el('span', { class: `chip chip-${state}`, 'data-state': state }, `${state}: ${count}`),
    );
  }
  root.append(chips);
}
