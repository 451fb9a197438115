/**
 * Portfolio list: one row per application with its derived control badges
 * and validation-state chip.  Pure projection of the API response; the
 * tier table lives server-side only.
 */

import { clear, el } from '../dom.js';
import type { ApplicationRecord, ControlRequirementSet } from '../types.js';

const CONTROL_LABELS: Array<[keyof ControlRequirementSet, string]> = [
  ['inventory_listed', 'inventory'],
  ['design_standards', 'design'],
  ['independent_validation', 'validation'],
  ['checking_controls', 'checks'],
  ['change_logs', 'change log'],
  ['change_monitoring', 'monitoring'],
  ['security', 'security'],
  ['archiving', 'archiving'],
];

export function controlBadges(controls: ControlRequirementSet): string[] {
  return CONTROL_LABELS.filter(([key]) => controls[key]).map(([, label]) => label);
}

export function renderApplicationList(
  root: HTMLElement,
  applications: ApplicationRecord[],
): void {
  clear(root);
  if (applications.length === 0) {
    root.append(el('p', { class: 'empty-state' }, 'No applications registered yet.'));
    return;
  }
  const table = el('table', { class: 'app-table' });
  table.append(
    el(
      'tr',
      {},
      ...['Name', 'Owner', 'Category', 'Tier', 'Controls', 'Validation', 'Score'].map(
        (h) => el('th', {}, h),
      ),
    ),
  );
  for (const app of applications) {
    const badges = el('td', { class: 'badges' });
    for (const label of controlBadges(app.required_controls)) {
      badges.append(el('span', { class: 'badge' }, label));
    }
    table.append(
      el(
        'tr',
        { 'data-record-id': String(app.record_id) },
        el('td', {}, app.name),
        el('td', {}, app.owner),
        el('td', {}, app.category),
        el('td', {}, app.tier),
        badges,
        el(
          'td',
          {},
          el('span', { class: `chip chip-${app.validation_state}` }, app.validation_state),
        ),
        el('td', {}, app.compliance_score === null ? '—' : app.compliance_score.toFixed(2)),
      ),
    );
  }
  root.append(table);
}
