/** Single-page shell: identity picker, tabs, and view wiring. */

import { ApiClient } from './api.js';
import { clear, el } from './dom.js';
import { renderApplicationList } from './views/applications.js';
import { renderDashboard } from './views/dashboard.js';
import { renderQueue } from './views/queue.js';
import { renderRegistrationForm } from './views/registration.js';

type TabName = 'applications' | 'register' | 'queue' | 'dashboard';

export function mountApp(root: HTMLElement, client: ApiClient): void {
  clear(root);

  const principal = el('input', {
    type: 'text',
    value: client.principal,
    class: 'principal-input',
    title: 'Acting identity (sent as X-Principal)',
  });
  principal.addEventListener('change', () => {
    client.principal = principal.value || 'anonymous';
  });

  const content = el('main', { class: 'content' });
  const tabs = el('nav', { class: 'tabs' });
  const header = el(
    'header',
    { class: 'topbar' },
    el('h1', {}, 'EUC Inventory'),
    tabs,
    el('label', { class: 'identity' }, 'Acting as ', principal),
  );
  root.append(header, content);

  async function show(tab: TabName): Promise<void> {
    tabs.querySelectorAll('button').forEach((b) => b.classList.remove('active'));
    tabs.querySelector(`[data-tab="${tab}"]`)?.classList.add('active');
    clear(content);
    if (tab === 'applications') {
      const { applications } = await client.listApplications();
      renderApplicationList(content, applications);
    } else if (tab === 'register') {
      renderRegistrationForm(content, client, () => void show('applications'));
    } else if (tab === 'queue') {
      const { changes } = await client.pendingChanges();
      renderQueue(content, changes, client, () => void show('queue'));
    } else {
      renderDashboard(content, await client.summary());
    }
  }

  const labels: Array<[TabName, string]> = [
    ['applications', 'Applications'],
    ['register', 'Register'],
    ['queue', 'Review queue'],
    ['dashboard', 'Dashboard'],
  ];
  for (const [tab, label] of labels) {
    const button = el('button', { 'data-tab': tab }, label);
    button.addEventListener('click', () => void show(tab));
    tabs.append(button);
  }

  void show('applications');
}

if (typeof document !== 'undefined' && document.getElementById('app')) {
  mountApp(document.getElementById('app') as HTMLElement, new ApiClient());
}
